//! Runs a selection of experiments with default protocols and writes a
//! battery summary next to the individual reports.

use std::path::Path;

use serde::Serialize;

use super::hysteresis::{run_hysteresis_cycles, HysteresisSpec};
use super::relaxation::{run_relaxation_test, RelaxationSpec};
use super::sensitivity::{run_indentation_sweep, SensitivitySpec};
use super::spatial::{run_spatial_scan, SpatialScanSpec};
use super::thermal::{run_thermal_sweep, ThermalSpec};
use super::{ExperimentKind, ExperimentReport, HarnessError, HarnessOptions};
use crate::config::SkinConfig;

pub const BATTERY_SUMMARY_FILE: &str = "summary.json";

/// Runs one experiment with its default protocol for `config`.
pub fn run_experiment(kind: ExperimentKind, config: &SkinConfig, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    match kind {
        ExperimentKind::Sensitivity => run_indentation_sweep(config, &SensitivitySpec::for_config(config)?, options),
        ExperimentKind::Hysteresis => run_hysteresis_cycles(config, &HysteresisSpec::for_config(config)?, options),
        ExperimentKind::Relaxation => run_relaxation_test(config, &RelaxationSpec::for_config(config)?, options),
        ExperimentKind::SpatialScan => run_spatial_scan(config, &SpatialScanSpec::for_config(config)?, options),
        ExperimentKind::Thermal => run_thermal_sweep(config, &ThermalSpec::for_config(config)?, options),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub reports: Vec<ExperimentReport>,
}

#[derive(Serialize)]
struct BatteryEntry<'a> {
    kind: ExperimentKind,
    passed: bool,
    summary_file: String,
    failed_checks: Vec<&'a str>,
}

#[derive(Serialize)]
struct BatteryFile<'a> {
    passed: bool,
    noise_free: bool,
    seed: u64,
    experiments: Vec<BatteryEntry<'a>>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(ExperimentReport::passed)
    }

    pub fn summary_json(&self, config: &SkinConfig, options: HarnessOptions) -> Result<String, HarnessError> {
        let file = BatteryFile {
            passed: self.passed(),
            noise_free: options.noise_free,
            seed: config.rng_seed,
            experiments: self
                .reports
                .iter()
                .map(|r| BatteryEntry {
                    kind: r.kind,
                    passed: r.passed(),
                    summary_file: r.summary_file_name(),
                    failed_checks: r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }
}

/// Runs `selection` (duplicates ignored, report order follows the canonical
/// experiment order) on independent threads. Every report is audited; with
/// `out_dir` it is written first so the audit re-reads the files, and the
/// battery summary is saved.
pub fn run_battery(
    config: &SkinConfig,
    selection: &[ExperimentKind],
    options: HarnessOptions,
    out_dir: Option<&Path>,
) -> Result<BatteryReport, HarnessError> {
    let kinds: Vec<ExperimentKind> = ExperimentKind::ALL
        .into_iter()
        .filter(|k| selection.contains(k))
        .collect();
    let results: Vec<Result<ExperimentReport, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&k| s.spawn(move || run_experiment(k, config, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    let mut reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    for r in &mut reports {
        if let Some(dir) = out_dir {
            r.write(dir)?;
        }
        r.audit(config)?;
    }
    let battery = BatteryReport { reports };
    if let Some(dir) = out_dir {
        std::fs::write(dir.join(BATTERY_SUMMARY_FILE), battery.summary_json(config, options)?)?;
    }
    Ok(battery)
}
