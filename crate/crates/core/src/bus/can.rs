use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::CHANNELS_PER_TRIANGLE;

/// Class bits in the top of every skin frame identifier.
pub const SKIN_CLASS: u16 = 0b101;
pub const FRAMES_PER_TRIANGLE: usize = 4;
pub const SAMPLES_PER_FRAME: usize = 3;
pub const SKIN_DLC: u8 = 7;
/// Tick tags wrap at this modulus.
pub const TICK_MODULUS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanError {
    #[error("board id {board_id} or triangle index {triangle_index} does not fit 4 bits")]
    AddressOverflow { board_id: u32, triangle_index: u32 },
    #[error("frame index {0} missing")]
    MissingFrame(u8),
    #[error("frames carry different tick tags")]
    InconsistentTick,
    #[error("identifier {0:#05x} is not a skin frame")]
    BadClassBits(u16),
    #[error("frames carry different identifiers")]
    InconsistentAddress,
    #[error("skin frames carry 7 data bytes, got {0}")]
    BadLength(u8),
}

/// Classic CAN frame with an 11-bit identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanFrame {
    pub can_id: u16,
    pub dlc: u8,
    pub data: [u8; 8],
}

impl CanFrame {
    pub fn payload(&self) -> &[u8] {
        &self.data[..(self.dlc.min(8) as usize)]
    }
}

/// Source of a triangle's frames: MTB board and triangle index on that board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Addressing {
    pub board_id: u8,
    pub triangle_index: u8,
}

impl Addressing {
    pub fn new(board_id: u32, triangle_index: u32) -> Result<Self, CanError> {
        if board_id > 15 || triangle_index > 15 {
            return Err(CanError::AddressOverflow {
                board_id,
                triangle_index,
            });
        }
        Ok(Self {
            board_id: board_id as u8,
            triangle_index: triangle_index as u8,
        })
    }

    /// Triangle index of the CDC at `addr` on I2C bus `bus`.
    pub fn from_i2c(board_id: u32, bus: u8, addr: u8) -> Result<Self, CanError> {
        Self::new(board_id, bus as u32 * 4 + addr as u32)
    }

    pub fn can_id(&self) -> u16 {
        (SKIN_CLASS << 8) | ((self.board_id as u16) << 4) | self.triangle_index as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedTriangle {
    pub addressing: Addressing,
    pub tick_tag: u8,
    pub samples: [u16; CHANNELS_PER_TRIANGLE],
}

/// Packs one triangle's twelve samples into four frames of three samples.
pub fn encode_frames(
    samples: &[u16; CHANNELS_PER_TRIANGLE],
    addressing: Addressing,
    tick: u64,
) -> Result<[CanFrame; FRAMES_PER_TRIANGLE], CanError> {
    Addressing::new(addressing.board_id as u32, addressing.triangle_index as u32)?;
    let tag = ((tick % TICK_MODULUS) as u8) << 2;
    let can_id = addressing.can_id();
    Ok(std::array::from_fn(|fi| {
        let mut data = [0u8; 8];
        data[0] = tag | fi as u8;
        for k in 0..SAMPLES_PER_FRAME {
            let v = samples[SAMPLES_PER_FRAME * fi + k].to_be_bytes();
            data[1 + 2 * k] = v[0];
            data[2 + 2 * k] = v[1];
        }
        CanFrame {
            can_id,
            dlc: SKIN_DLC,
            data,
        }
    }))
}

/// Inverse of [`encode_frames`]; frames may arrive in any order.
pub fn decode_frames(frames: &[CanFrame]) -> Result<DecodedTriangle, CanError> {
    let first = frames.first().ok_or(CanError::MissingFrame(0))?;
    let mut slots: [Option<&CanFrame>; FRAMES_PER_TRIANGLE] = [None; FRAMES_PER_TRIANGLE];
    for f in frames {
        if f.can_id >> 8 != SKIN_CLASS || f.can_id > 0x7FF {
            return Err(CanError::BadClassBits(f.can_id));
        }
        if f.dlc != SKIN_DLC {
            return Err(CanError::BadLength(f.dlc));
        }
        if f.can_id != first.can_id {
            return Err(CanError::InconsistentAddress);
        }
        if f.data[0] >> 2 != first.data[0] >> 2 {
            return Err(CanError::InconsistentTick);
        }
        slots[(f.data[0] & 0b11) as usize] = Some(f);
    }
    let mut samples = [0u16; CHANNELS_PER_TRIANGLE];
    for (fi, slot) in slots.iter().enumerate() {
        let f = slot.ok_or(CanError::MissingFrame(fi as u8))?;
        for k in 0..SAMPLES_PER_FRAME {
            samples[SAMPLES_PER_FRAME * fi + k] = u16::from_be_bytes([f.data[1 + 2 * k], f.data[2 + 2 * k]]);
        }
    }
    if frames.len() != FRAMES_PER_TRIANGLE {
        return Err(CanError::MissingFrame(FRAMES_PER_TRIANGLE as u8));
    }
    Ok(DecodedTriangle {
        addressing: Addressing {
            board_id: ((first.can_id >> 4) & 0xF) as u8,
            triangle_index: (first.can_id & 0xF) as u8,
        },
        tick_tag: first.data[0] >> 2,
        samples,
    })
}
