//! Deterministic digital twin of a modular capacitive robot skin.
//!
//! The crate covers the sensor mesh ([`topology`]), the transduction physics
//! ([`physics`]), the digitization and CAN transport chain ([`bus`]), the
//! calibration and signal-processing pipeline ([`pipeline`]) and a virtual
//! test bench running the characterization protocols ([`harness`]).

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bus;
pub mod config;
pub mod harness;
pub mod physics;
pub mod pipeline;
pub mod sim;
pub mod topology;
