//! Constant indentation held for a long time; the capacitance decay gives the
//! relaxation time constant.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bench::Bench;
use super::report::{csv_string, parse_csv, Check, CsvArtifact, ExperimentReport};
use super::{default_target, ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::pipeline::fit_relaxation;
use crate::topology::TaxelRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSpec {
    pub patch: u32,
    pub target: TaxelRef,
    pub probe_diameter_mm: f64,
    pub depth_mm: f64,
    pub hold_s: f64,
    pub baseline_ticks: usize,
    /// Relative tolerance on the fitted time constant with noise.
    pub relative_tolerance: f64,
    /// Relative tolerance without noise.
    pub noise_free_tolerance: f64,
}

impl RelaxationSpec {
    pub fn for_config(config: &SkinConfig) -> Result<Self, HarnessError> {
        let (patch, target) = default_target(config)?;
        Ok(Self {
            patch,
            target,
            probe_diameter_mm: 7.0,
            depth_mm: 0.4,
            hold_s: 600.0,
            baseline_ticks: crate::pipeline::DEFAULT_BASELINE_WINDOW,
            relative_tolerance: 0.10,
            noise_free_tolerance: 0.02,
        })
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    time_s: f64,
    load_cell_n: f64,
    deltac_ff: f64,
}

const HEADER: [&str; 6] = ["tick", "time_s", "depth_mm", "load_cell_n", "counts", "deltac_ff"];

pub fn run_relaxation_test(config: &SkinConfig, spec: &RelaxationSpec, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    if !(spec.hold_s > 0.0) {
        return Err(HarnessError::InvalidProtocol("hold must be > 0 s".into()));
    }
    let kind = ExperimentKind::Relaxation;
    let mut bench = Bench::new(config.clone(), spec.patch, spec.target, spec.probe_diameter_mm, options, kind.salt())?;
    let ch = spec.target.channel as usize;
    let lsb = bench.config().cdc.lsb_size_ff;
    let baseline = bench.capture_baseline(spec.baseline_ticks)[ch];
    let at = bench.target_position();
    if !(spec.depth_mm > 0.0 && spec.depth_mm < bench.thickness_mm()) {
        return Err(HarnessError::InvalidProtocol(format!("hold depth {} mm out of range", spec.depth_mm)));
    }
    bench.press(at, spec.probe_diameter_mm, spec.depth_mm)?;
    let mut rows = Vec::new();
    for _ in 0..bench.ticks_for(spec.hold_s) {
        let r = bench.tick();
        rows.push(vec![
            r.tick.to_string(),
            r.time_s.to_string(),
            spec.depth_mm.to_string(),
            r.load_cell_n.to_string(),
            r.counts[ch].to_string(),
            ((r.counts[ch] - baseline) * lsb).to_string(),
        ]);
    }
    bench.release();
    let csv = vec![CsvArtifact {
        name: "relaxation.csv".into(),
        content: csv_string(&HEADER, rows)?,
    }];
    let contents: Vec<String> = csv.iter().map(|c| c.content.clone()).collect();
    let (summary, checks) = summarize(config, spec, options, &contents)?;
    ExperimentReport::build(kind, options, spec, csv, summary, checks)
}

pub fn summarize(
    config: &SkinConfig,
    spec: &RelaxationSpec,
    options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    let rows: Vec<Row> = parse_csv(csv.first().map_or("", String::as_str))?;
    let t0 = rows.first().map_or(0.0, |r| r.time_s);
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.time_s - t0, r.deltac_ff)).collect();
    let fit = fit_relaxation(&series)?;
    let expected = config.material.relaxation_tau_s;
    let rel = if options.noise_free {
        spec.noise_free_tolerance
    } else {
        spec.relative_tolerance
    };
    let monotone = rows.windows(2).all(|w| w[1].load_cell_n <= w[0].load_cell_n);
    let first = rows.first().map_or(f64::NAN, |r| r.load_cell_n);
    let last = rows.last().map_or(f64::NAN, |r| r.load_cell_n);
    let checks = vec![
        Check::within("relaxation time constant (s)", fit.tau_s, expected, rel * expected),
        Check::flag("load cell decreases monotonically", monotone && last < first),
    ];
    let summary = json!({
        "target": { "patch": spec.patch, "triangle": spec.target.triangle_id, "channel": spec.target.channel },
        "samples": rows.len(),
        "sigma0_ff": fit.sigma0,
        "tau_s": fit.tau_s,
        "expected_tau_s": expected,
        "load_cell_start_n": first,
        "load_cell_end_n": last,
    });
    Ok((summary, checks))
}
