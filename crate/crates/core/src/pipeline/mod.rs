//! Calibration and signal processing over recorded count streams.

pub mod baseline;
pub mod compensation;
pub mod contact;
pub mod fit;
pub mod recording;

use thiserror::Error;

use crate::physics::MaterialModel;
use crate::topology::TaxelRef;

pub use baseline::{capture_baseline, Baseline, DEFAULT_BASELINE_WINDOW};
pub use compensation::{
    calibrate_gains, compensate, compensate_recording, CalibrationEntry, CalibrationTable, DEGENERATE_VARIANCE,
};
pub use contact::{detect_contacts, localize_contact, ActivationRegion, ContactEstimate, DetectionParams};
pub use fit::{fit_relaxation, fit_sensitivity, ols, RelaxationFit, SlopeFit};
pub use recording::Recording;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stream is empty")]
    EmptyStream,
    #[error("no calibration for triangle {}, channel {}", .0.triangle_id, .0.channel)]
    MissingCalibration(TaxelRef),
    #[error("no thermal pad of triangle {triangle_id} varies enough to calibrate against")]
    DegenerateSweep { triangle_id: u32 },
    #[error("capacitance change {0} fF is outside the static curve")]
    OutOfRange(f64),
    #[error("range {from_kpa}..{to_kpa} kPa holds {count} samples, at least 2 needed")]
    InsufficientData { from_kpa: f64, to_kpa: f64, count: usize },
    #[error("relaxation series needs at least 3 strictly positive points")]
    NonPositiveSeries,
    #[error("relaxation series does not decay")]
    NonDecaying,
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pressure producing capacitance change `deltac_ff` on the static curve.
pub fn estimate_pressure(deltac_ff: f64, material: &MaterialModel) -> Result<f64, PipelineError> {
    material
        .deltac_to_pressure(deltac_ff)
        .map_err(|_| PipelineError::OutOfRange(deltac_ff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn estimate_hand_values() {
        let m = MaterialModel::default();
        assert_eq!(estimate_pressure(0.0, &m).unwrap(), 0.0);
        assert!((estimate_pressure(25.0, &m).unwrap() - 10.0).abs() < 1e-12);
        let at30 = m.pressure_to_deltac(30.0).unwrap();
        assert!((estimate_pressure(at30, &m).unwrap() - 30.0).abs() < 1e-12);
        assert!(matches!(estimate_pressure(-1.0, &m), Err(PipelineError::OutOfRange(_))));
    }

    proptest! {
        #[test]
        fn inverse_identity(p in 0.0..=160.0f64) {
            let m = MaterialModel::default();
            let back = estimate_pressure(m.pressure_to_deltac(p).unwrap(), &m).unwrap();
            prop_assert!((back - p).abs() <= 1e-9);
        }
    }
}
