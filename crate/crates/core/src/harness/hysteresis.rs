//! Loading and unloading staircases, repeated with a short rest, to measure
//! the gap between the two branches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bench::Bench;
use super::report::{csv_string, parse_csv, Check, CsvArtifact, ExperimentReport};
use super::{default_target, mean, std_dev, ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::topology::TaxelRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisSpec {
    pub patch: u32,
    pub target: TaxelRef,
    pub probe_diameter_mm: f64,
    pub step_mm: f64,
    pub force_limit_n: f64,
    pub dwell_s: f64,
    pub cycles: usize,
    pub wait_s: f64,
    pub baseline_ticks: usize,
    pub expected_gap_ff: f64,
    pub gap_tolerance_ff: f64,
    pub expected_peak_kpa: f64,
    pub peak_tolerance_kpa: f64,
    /// Largest acceptable gap as a fraction of full scale.
    pub max_gap_fraction: f64,
}

impl HysteresisSpec {
    pub fn for_config(config: &SkinConfig) -> Result<Self, HarnessError> {
        let (patch, target) = default_target(config)?;
        Ok(Self {
            patch,
            target,
            probe_diameter_mm: 7.0,
            step_mm: 0.2,
            force_limit_n: 4.9,
            dwell_s: 2.0,
            cycles: 15,
            wait_s: 60.0,
            baseline_ticks: crate::pipeline::DEFAULT_BASELINE_WINDOW,
            expected_gap_ff: 9.1,
            gap_tolerance_ff: 0.5,
            expected_peak_kpa: 28.6,
            peak_tolerance_kpa: 5.0,
            max_gap_fraction: 0.05,
        })
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    cycle: usize,
    phase: String,
    step: usize,
    pressure_kpa: f64,
    deltac_ff: f64,
}

/// Pressures and capacitance changes of one group of samples.
type Series = (Vec<f64>, Vec<f64>);

const HEADER: [&str; 10] = [
    "cycle", "phase", "step", "depth_mm", "tick", "time_s", "load_cell_n", "pressure_kpa", "counts", "deltac_ff",
];

pub fn run_hysteresis_cycles(config: &SkinConfig, spec: &HysteresisSpec, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    let kind = ExperimentKind::Hysteresis;
    let mut bench = Bench::new(config.clone(), spec.patch, spec.target, spec.probe_diameter_mm, options, kind.salt())?;
    let ch = spec.target.channel as usize;
    let lsb = bench.config().cdc.lsb_size_ff;
    let baseline = bench.capture_baseline(spec.baseline_ticks)[ch];
    let steps = bench.max_steps(spec.step_mm, spec.force_limit_n)?;
    if steps < 2 {
        return Err(HarnessError::InvalidProtocol("force limit admits fewer than two steps".into()));
    }
    let at = bench.target_position();
    let area_m = bench.load_cell.area_mm2 * 1e-3;
    let plan: Vec<(&str, usize)> = (1..=steps)
        .map(|k| ("load", k))
        .chain((1..steps).rev().map(|k| ("unload", k)))
        .collect();
    let mut rows = Vec::new();
    for cycle in 0..spec.cycles {
        if cycle > 0 {
            bench.wait(spec.wait_s);
        }
        for &(phase, k) in &plan {
            let depth = k as f64 * spec.step_mm;
            bench.press(at, spec.probe_diameter_mm, depth)?;
            for _ in 0..bench.ticks_for(spec.dwell_s) {
                let r = bench.tick();
                rows.push(vec![
                    cycle.to_string(),
                    phase.to_string(),
                    k.to_string(),
                    depth.to_string(),
                    r.tick.to_string(),
                    r.time_s.to_string(),
                    r.load_cell_n.to_string(),
                    (r.load_cell_n / area_m).to_string(),
                    r.counts[ch].to_string(),
                    ((r.counts[ch] - baseline) * lsb).to_string(),
                ]);
            }
        }
        bench.release();
    }
    let csv = vec![CsvArtifact {
        name: "hysteresis.csv".into(),
        content: csv_string(&HEADER, rows)?,
    }];
    let contents: Vec<String> = csv.iter().map(|c| c.content.clone()).collect();
    let (summary, checks) = summarize(config, spec, options, &contents)?;
    ExperimentReport::build(kind, options, spec, csv, summary, checks)
}

/// Branch gap at each unloading step: the unloading reading minus the loading
/// reading at the same step, corrected to equal pressure with the local
/// secant slope of the loading branch.
pub fn summarize(
    config: &SkinConfig,
    spec: &HysteresisSpec,
    _options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    let rows: Vec<Row> = parse_csv(csv.first().map_or("", String::as_str))?;
    let mut dwell: BTreeMap<(bool, usize, usize), Series> = BTreeMap::new();
    for r in &rows {
        let e = dwell.entry((r.phase == "unload", r.step, r.cycle)).or_default();
        e.0.push(r.pressure_kpa);
        e.1.push(r.deltac_ff);
    }
    let mut branch: BTreeMap<(bool, usize), Series> = BTreeMap::new();
    for ((unload, step, _), (p, dc)) in &dwell {
        let e = branch.entry((*unload, *step)).or_default();
        e.0.push(mean(p));
        e.1.push(mean(dc));
    }
    let point = |unload: bool, step: usize| -> Option<(f64, f64)> {
        if step == 0 {
            return Some((0.0, 0.0));
        }
        branch.get(&(unload, step)).map(|(p, dc)| (mean(p), mean(dc)))
    };
    let full_scale = config.material.full_scale_deltac();
    let bound = spec.max_gap_fraction * full_scale;
    let mut gaps = Vec::new();
    let mut step_json = Vec::new();
    for (&(unload, step), (p, dc)) in &branch {
        step_json.push(json!({
            "phase": if unload { "unload" } else { "load" },
            "step": step,
            "pressure_kpa": mean(p),
            "deltac_mean_ff": mean(dc),
            "deltac_std_ff": std_dev(dc),
        }));
        if !unload {
            continue;
        }
        let (Some((pl, cl)), Some((pu, cu))) = (point(false, step), point(true, step)) else {
            continue;
        };
        let lo = point(false, step - 1).unwrap_or((pl, cl));
        let hi = point(false, step + 1).unwrap_or((pl, cl));
        let slope = if hi.0 != lo.0 { (hi.1 - lo.1) / (hi.0 - lo.0) } else { 0.0 };
        gaps.push((step, pl, cu - cl - slope * (pu - pl)));
    }
    let (max_step, max_at, max_gap) = gaps
        .iter()
        .copied()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap_or((0, f64::NAN, f64::NAN));
    let worst_fraction = gaps.iter().map(|g| g.2 / full_scale).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::within("max loop gap (fF)", max_gap, spec.expected_gap_ff, spec.gap_tolerance_ff),
        Check::within("max gap location (kPa)", max_at, spec.expected_peak_kpa, spec.peak_tolerance_kpa),
        Check::at_most("largest gap / full scale", worst_fraction, spec.max_gap_fraction),
    ];
    let summary = json!({
        "target": { "patch": spec.patch, "triangle": spec.target.triangle_id, "channel": spec.target.channel },
        "full_scale_ff": full_scale,
        "gap_bound_ff": bound,
        "max_gap_ff": max_gap,
        "max_gap_step": max_step,
        "max_gap_pressure_kpa": max_at,
        "gaps": gaps.iter().map(|g| json!({"step": g.0, "pressure_kpa": g.1, "gap_ff": g.2})).collect::<Vec<_>>(),
        "steps": step_json,
    });
    Ok((summary, checks))
}
