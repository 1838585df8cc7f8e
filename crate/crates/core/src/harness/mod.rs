//! Virtual test bench running the characterization protocols in simulated
//! time, with CSV reports whose summaries are recomputed from the CSV itself.

pub mod battery;
pub mod bench;
pub mod hysteresis;
pub mod relaxation;
pub mod report;
pub mod sensitivity;
pub mod simulate;
pub mod spatial;
pub mod thermal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SkinConfig;
use crate::topology::{Patch, Point2, TaxelKind, TaxelRef, CENTRAL_CHANNEL, TRIANGLE_SIDE_MM};

pub use battery::{run_battery, run_experiment, BatteryReport};
pub use bench::{Bench, ProbeTrajectory, VirtualLoadCell, Waypoint};
pub use report::{Check, ExperimentReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("scan segment leaves the patch at ({x}, {y}) mm")]
    SegmentOutOfBounds { x: f64, y: f64 },
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("audit mismatch in {kind} report: {detail}")]
    AuditMismatch { kind: ExperimentKind, detail: String },
    #[error(transparent)]
    Physics(#[from] crate::physics::PhysicsError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Bus(#[from] crate::bus::BusError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sensitivity,
    Hysteresis,
    Relaxation,
    SpatialScan,
    Thermal,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Sensitivity,
        ExperimentKind::Hysteresis,
        ExperimentKind::Relaxation,
        ExperimentKind::SpatialScan,
        ExperimentKind::Thermal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sensitivity => "sensitivity",
            ExperimentKind::Hysteresis => "hysteresis",
            ExperimentKind::Relaxation => "relaxation",
            ExperimentKind::SpatialScan => "spatial-scan",
            ExperimentKind::Thermal => "thermal",
        }
    }

    /// Separates the noise stream of each experiment.
    pub(crate) fn salt(self) -> u64 {
        match self {
            ExperimentKind::Sensitivity => 0x5e45,
            ExperimentKind::Hysteresis => 0x4795,
            ExperimentKind::Relaxation => 0x7e1a,
            ExperimentKind::SpatialScan => 0x5ca4,
            ExperimentKind::Thermal => 0x7e4d,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// Run-wide switches shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarnessOptions {
    /// Zero noise and unquantized acquisition.
    pub noise_free: bool,
}

/// Patch-frame centroid of a triangle.
pub fn triangle_centroid(patch: &Patch, triangle_pos: usize) -> Point2 {
    let local = Point2::new(TRIANGLE_SIDE_MM / 2.0, TRIANGLE_SIDE_MM / (2.0 * 3f64.sqrt()));
    patch.triangles[triangle_pos].pose.apply(local)
}

/// Central taxel of the triangle nearest the patch's mean triangle centroid.
pub fn default_target(config: &SkinConfig) -> Result<(u32, TaxelRef), HarnessError> {
    let patch = config
        .patches
        .first()
        .ok_or_else(|| HarnessError::InvalidTarget("config has no patch".into()))?;
    let n = patch.triangles.len() as f64;
    let centres: Vec<Point2> = (0..patch.triangles.len()).map(|i| triangle_centroid(patch, i)).collect();
    let mean = Point2::new(
        centres.iter().map(|c| c.x).sum::<f64>() / n,
        centres.iter().map(|c| c.y).sum::<f64>() / n,
    );
    let best = (0..centres.len())
        .min_by(|&a, &b| centres[a].distance(mean).total_cmp(&centres[b].distance(mean)).then(a.cmp(&b)))
        .ok_or_else(|| HarnessError::InvalidTarget("patch has no triangle".into()))?;
    Ok((patch.id, TaxelRef::new(patch.triangles[best].id, CENTRAL_CHANNEL)))
}

/// Checks that `target` names a pressure taxel of patch `patch_id`.
pub fn check_target(config: &SkinConfig, patch_id: u32, target: TaxelRef) -> Result<(), HarnessError> {
    let patch = config
        .patch(patch_id)
        .ok_or_else(|| HarnessError::InvalidTarget(format!("no patch {patch_id}")))?;
    match patch.taxel(target) {
        Some(t) if t.kind == TaxelKind::Pressure => Ok(()),
        Some(_) => Err(HarnessError::InvalidTarget(format!(
            "triangle {} channel {} is a thermal pad",
            target.triangle_id, target.channel
        ))),
        None => Err(HarnessError::InvalidTarget(format!(
            "no taxel at triangle {} channel {}",
            target.triangle_id, target.channel
        ))),
    }
}

/// Recomputes an experiment's summary and checks from its recorded protocol
/// and CSV contents.
pub(crate) fn resummarize(
    kind: ExperimentKind,
    spec: &serde_json::Value,
    config: &SkinConfig,
    options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    match kind {
        ExperimentKind::Sensitivity => sensitivity::summarize(config, &serde_json::from_value(spec.clone())?, options, csv),
        ExperimentKind::Hysteresis => hysteresis::summarize(config, &serde_json::from_value(spec.clone())?, options, csv),
        ExperimentKind::Relaxation => relaxation::summarize(config, &serde_json::from_value(spec.clone())?, options, csv),
        ExperimentKind::SpatialScan => spatial::summarize(config, &serde_json::from_value(spec.clone())?, options, csv),
        ExperimentKind::Thermal => thermal::summarize(config, &serde_json::from_value(spec.clone())?, options, csv),
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; exactly zero for identical values.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let shift = xs[0];
    let d: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let m = mean(&d);
    let ss: f64 = d.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_target_is_centre_of_flat_patch() {
        let config = SkinConfig::preset("flat-prototype").unwrap();
        let (patch, target) = default_target(&config).unwrap();
        assert_eq!(patch, 0);
        assert_eq!(target, TaxelRef::new(9, 5));
        let p = config.patches[0].taxel_world_position(9, 5).unwrap();
        assert!((p.x - 60.0).abs() < 1e-9);
    }

    #[test]
    fn thermal_target_rejected() {
        let config = SkinConfig::preset("single-triangle").unwrap();
        assert!(check_target(&config, 0, TaxelRef::new(0, 6)).is_err());
        assert!(check_target(&config, 0, TaxelRef::new(3, 1)).is_err());
        assert!(check_target(&config, 0, TaxelRef::new(0, 1)).is_ok());
    }

    #[test]
    fn kinds_parse() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn identical_values_have_zero_spread() {
        assert_eq!(std_dev(&[0.1 + 0.2; 15]), 0.0);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
