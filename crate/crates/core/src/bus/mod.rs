//! Digitization and transport: CDC sampling, MTB aggregation, CAN framing and
//! the binary frame log.

pub mod can;
pub mod log;
pub mod mtb;

use thiserror::Error;

pub use can::{decode_frames, encode_frames, Addressing, CanError, CanFrame, DecodedTriangle};
pub use log::{encode_log, parse_log, write_record, LogError, LogRecord};
pub use mtb::{
    cdc_sample_triangle, decode_records, encode_patch, mtb_poll, tick_time_ns, write_samples_csv, FrameSet, MtbPoller,
    TaxelSample,
};

#[derive(Debug, Error)]
pub enum BusError {
    #[error(transparent)]
    Can(#[from] CanError),
    #[error("bad frame group at byte offset {offset}: {source}")]
    Frame {
        offset: usize,
        #[source]
        source: CanError,
    },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("unknown triangle {0}")]
    UnknownTriangle(u32),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
