//! On-disk skin configuration and its validation.
//!
//! The config file is TOML. Patches are stored fully expanded, down to every
//! taxel descriptor, so a file describes exactly one sensor and reloads
//! bit-identically.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{CdcParams, MaterialModel};
use crate::topology::{
    build_patch, flat_prototype_layout, forearm_layout, inside_canonical_triangle, single_triangle_layout, Patch,
    PatchLayout, TaxelKind, CHANNELS_PER_TRIANGLE, I2C_ADDRESSES, I2C_BUSES, MAX_TRIANGLES_PER_PATCH,
    THERMAL_CHANNELS,
};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 25.0;
pub const DEFAULT_SEED: u64 = 2013;
/// Patch ids become 4-bit CAN board ids.
pub const MAX_PATCH_ID: u32 = 15;

pub const PRESETS: [&str; 3] = ["single-triangle", "flat-prototype", "icub-forearm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinConfig {
    pub sample_rate_hz: f64,
    pub rng_seed: u64,
    pub material: MaterialModel,
    pub cdc: CdcParams,
    pub patches: Vec<Patch>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("cannot serialize config: {0}")]
    Serialize(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown material preset {0:?}")]
    UnknownMaterial(String),
    #[error("invalid layout: {0}")]
    Layout(#[from] crate::topology::TopologyError),
}

impl SkinConfig {
    pub fn from_layout(layout: &PatchLayout) -> Result<Self, ConfigError> {
        Ok(Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            rng_seed: DEFAULT_SEED,
            material: MaterialModel::default(),
            cdc: CdcParams::default(),
            patches: vec![build_patch(layout)?],
        })
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let layout = match name {
            "single-triangle" => single_triangle_layout(),
            "flat-prototype" => flat_prototype_layout(),
            "icub-forearm" => forearm_layout(),
            _ => return Err(ConfigError::UnknownPreset(name.to_string())),
        };
        Self::from_layout(&layout)
    }

    /// Replaces the material by a named preset.
    pub fn with_material(mut self, name: &str) -> Result<Self, ConfigError> {
        self.material = MaterialModel::preset(name).ok_or_else(|| ConfigError::UnknownMaterial(name.into()))?;
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml_string()?).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn patch(&self, id: u32) -> Option<&Patch> {
        self.patches.iter().find(|p| p.id == id)
    }

    pub fn tick_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            reason: reason.into(),
        });
    }
}

/// Checks every invariant of the configuration; violations are collected,
/// never raised.
pub fn validate_config(config: &SkinConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(config.sample_rate_hz > 0.0 && config.sample_rate_hz.is_finite()) {
        report.push("sample_rate", format!("must be > 0, got {}", config.sample_rate_hz));
    }
    if config.rng_seed > i64::MAX as u64 {
        report.push("rng_seed", "must fit a signed 64-bit integer");
    }
    for (path, reason) in config.material.violations() {
        report.push(format!("material.{path}"), reason);
    }
    for (path, reason) in config.cdc.violations() {
        report.push(format!("cdc.{path}"), reason);
    }
    if config.patches.is_empty() {
        report.push("patches", "at least one patch required");
    }
    let mut patch_ids = BTreeSet::new();
    for (pi, patch) in config.patches.iter().enumerate() {
        let pp = format!("patches[{pi}]");
        if !patch_ids.insert(patch.id) {
            report.push(format!("{pp}.id"), format!("duplicate patch id {}", patch.id));
        }
        if patch.id > MAX_PATCH_ID {
            report.push(format!("{pp}.id"), format!("{} exceeds the 4-bit board id", patch.id));
        }
        validate_patch(patch, &pp, &mut report);
    }
    report
}

fn validate_patch(patch: &Patch, pp: &str, report: &mut ValidationReport) {
    let n = patch.triangles.len();
    if n == 0 || n > MAX_TRIANGLES_PER_PATCH {
        report.push(
            format!("{pp}.triangles"),
            format!("triangle count {n} not in 1..={MAX_TRIANGLES_PER_PATCH}"),
        );
    }
    if !(patch.dielectric_thickness_mm > 0.0 && patch.dielectric_thickness_mm.is_finite()) {
        report.push(format!("{pp}.dielectric_thickness_mm"), "must be > 0");
    }
    let mut addrs = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for (ti, tri) in patch.triangles.iter().enumerate() {
        let tp = format!("{pp}.triangles[{ti}]");
        if !ids.insert(tri.id) {
            report.push(format!("{tp}.id"), format!("duplicate triangle id {}", tri.id));
        }
        if tri.i2c_bus >= I2C_BUSES || tri.i2c_addr >= I2C_ADDRESSES {
            report.push(
                format!("{tp}.i2c"),
                format!("bus {} address {} out of range", tri.i2c_bus, tri.i2c_addr),
            );
        }
        if !addrs.insert((tri.i2c_bus, tri.i2c_addr)) {
            report.push(
                format!("{tp}.i2c"),
                format!("duplicate address: bus {} address {}", tri.i2c_bus, tri.i2c_addr),
            );
        }
        if !tri.pose.is_finite() {
            report.push(format!("{tp}.pose"), "non-finite pose");
        }
        let channels: BTreeSet<u8> = tri.taxels.iter().map(|t| t.channel).collect();
        if tri.taxels.len() != CHANNELS_PER_TRIANGLE
            || channels.len() != CHANNELS_PER_TRIANGLE
            || channels.iter().any(|&c| c as usize >= CHANNELS_PER_TRIANGLE)
        {
            report.push(format!("{tp}.taxels"), "channels 0..11 must each appear exactly once");
        }
        let thermal: Vec<u8> = tri
            .taxels
            .iter()
            .filter(|t| t.kind == TaxelKind::Thermal)
            .map(|t| t.channel)
            .collect();
        if thermal.len() != 2 {
            report.push(format!("{tp}.taxels"), format!("thermal-pad count {} != 2", thermal.len()));
        } else if thermal != THERMAL_CHANNELS {
            report.push(format!("{tp}.taxels"), format!("thermal pads on channels {thermal:?}, expected 6 and 7"));
        }
        for (k, t) in tri.taxels.iter().enumerate() {
            let xp = format!("{tp}.taxels[{k}]");
            if t.triangle_id != tri.id {
                report.push(format!("{xp}.triangle_id"), "does not match the owning triangle");
            }
            if !(t.area_mm2 > 0.0 && t.area_mm2.is_finite()) {
                report.push(format!("{xp}.area_mm2"), "must be > 0");
            }
            if !inside_canonical_triangle(t.position_mm, 1e-9) {
                report.push(format!("{xp}.position_mm"), "outside the triangle outline");
            }
            if !(1..=7).contains(&t.drift_group) {
                report.push(format!("{xp}.drift_group"), format!("{} not in 1..=7", t.drift_group));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_clean() {
        for name in PRESETS {
            let c = SkinConfig::preset(name).unwrap();
            assert!(validate_config(&c).is_empty(), "{name}: {:?}", validate_config(&c));
        }
        let foam = SkinConfig::preset("single-triangle").unwrap().with_material("foam-2008").unwrap();
        assert!(validate_config(&foam).is_empty());
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        for name in PRESETS {
            let c = SkinConfig::preset(name).unwrap();
            let text = c.to_toml_string().unwrap();
            let back = SkinConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn three_thermal_channels_flagged() {
        let mut c = SkinConfig::preset("single-triangle").unwrap();
        c.patches[0].triangles[0].taxels[0].kind = TaxelKind::Thermal;
        let r = validate_config(&c);
        assert!(r.violations.iter().any(|v| v.reason.contains("thermal-pad count")), "{r:?}");
    }

    #[test]
    fn zero_sample_rate_flagged() {
        let mut c = SkinConfig::preset("single-triangle").unwrap();
        c.sample_rate_hz = 0.0;
        let r = validate_config(&c);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, "sample_rate");
    }

    #[test]
    fn duplicate_address_flagged() {
        let mut c = SkinConfig::preset("flat-prototype").unwrap();
        c.patches[0].triangles[1].i2c_addr = 0;
        assert!(!validate_config(&c).is_empty());
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(SkinConfig::preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }
}
