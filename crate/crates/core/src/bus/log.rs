//! Binary frame log.
//!
//! A log is a plain concatenation of records:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 8     | simulated time in ns, little-endian u64 |
//! | 2     | CAN identifier, little-endian u16       |
//! | 1     | dlc (0..=8)                             |
//! | dlc   | payload                                 |

use std::io::Write;

use thiserror::Error;

use super::can::CanFrame;

const HEADER_LEN: usize = 11;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt log at byte offset {offset}: {reason}")]
    CorruptLog { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogRecord {
    pub time_ns: u64,
    pub frame: CanFrame,
    /// Position of the record's first byte in the log.
    pub offset: usize,
}

pub fn write_record<W: Write>(out: &mut W, time_ns: u64, frame: &CanFrame) -> std::io::Result<()> {
    out.write_all(&time_ns.to_le_bytes())?;
    out.write_all(&frame.can_id.to_le_bytes())?;
    out.write_all(&[frame.dlc])?;
    out.write_all(frame.payload())
}

pub fn encode_log<'a>(records: impl IntoIterator<Item = (u64, &'a CanFrame)>) -> Vec<u8> {
    let mut out = Vec::new();
    for (t, f) in records {
        write_record(&mut out, t, f).expect("writing to a Vec cannot fail");
    }
    out
}

pub fn parse_log(bytes: &[u8]) -> Result<Vec<LogRecord>, LogError> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let corrupt = |reason: String| LogError::CorruptLog { offset: pos, reason };
        if bytes.len() - pos < HEADER_LEN {
            return Err(corrupt(format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len() - pos)));
        }
        let time_ns = u64::from_le_bytes(bytes[pos..pos + 8].try_into().expect("8-byte slice"));
        let can_id = u16::from_le_bytes([bytes[pos + 8], bytes[pos + 9]]);
        let dlc = bytes[pos + 10];
        if can_id > 0x7FF {
            return Err(corrupt(format!("identifier {can_id:#x} exceeds 11 bits")));
        }
        if dlc > 8 {
            return Err(corrupt(format!("dlc {dlc} exceeds 8")));
        }
        let end = pos + HEADER_LEN + dlc as usize;
        if end > bytes.len() {
            return Err(corrupt(format!("truncated payload ({} of {dlc} bytes)", bytes.len() - pos - HEADER_LEN)));
        }
        let mut data = [0u8; 8];
        data[..dlc as usize].copy_from_slice(&bytes[pos + HEADER_LEN..end]);
        records.push(LogRecord {
            time_ns,
            frame: CanFrame { can_id, dlc, data },
            offset: pos,
        });
        pos = end;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(id: u16) -> CanFrame {
        CanFrame {
            can_id: id,
            dlc: 7,
            data: [1, 2, 3, 4, 5, 6, 7, 0],
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let frames = [frame(0x512), frame(0x513)];
        let bytes = encode_log([(0, &frames[0]), (40_000_000, &frames[1])]);
        assert_eq!(bytes.len(), 2 * (11 + 7));
        let parsed = parse_log(&bytes).unwrap();
        assert_eq!(parsed[1].time_ns, 40_000_000);
        assert_eq!(parsed[1].offset, 18);
        let again = encode_log(parsed.iter().map(|r| (r.time_ns, &r.frame)));
        assert_eq!(again, bytes);
    }

    #[test]
    fn truncation_reports_offset() {
        let frames = [frame(0x512), frame(0x513)];
        let bytes = encode_log([(0, &frames[0]), (1, &frames[1])]);
        match parse_log(&bytes[..bytes.len() - 3]) {
            Err(LogError::CorruptLog { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("{other:?}"),
        }
        match parse_log(&bytes[..5]) {
            Err(LogError::CorruptLog { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_log() {
        assert!(parse_log(&[]).unwrap().is_empty());
    }
}
