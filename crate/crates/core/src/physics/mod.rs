//! Transduction from mechanical and thermal stimuli to digitized counts.

pub mod cdc;
pub mod hysteresis;
pub mod material;
pub mod relaxation;
pub mod spread;
pub mod state;
pub mod thermal;

use thiserror::Error;

pub use cdc::{sample_counts, CdcParams};
pub use hysteresis::{gap_profile, HysteresisMemory};
pub use material::{MaterialModel, SensitivitySegment};
pub use relaxation::{step_relaxation, Relaxation};
pub use spread::{apply_spatial_spread, Contact, PressureMap};
pub use state::{sample_taxel, DeltaCComponents, TaxelState};
pub use thermal::{thermal_response, ThermalModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("pressure {0} kPa is above the characterized range")]
    PressureOutOfRange(f64),
    #[error("pressure {0} kPa is negative")]
    NegativePressure(f64),
    #[error("capacitance change {0} fF is outside the static curve")]
    DeltaCOutOfRange(f64),
    #[error("depth {0} mm is negative")]
    NegativeDepth(f64),
    #[error("depth {depth_mm} mm reaches the dielectric thickness {thickness_mm} mm")]
    DepthExceedsThickness { depth_mm: f64, thickness_mm: f64 },
}
