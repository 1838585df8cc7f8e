//! Repeated indentation staircase: each step presses from rest, dwells,
//! retracts, and goes 0.2 mm deeper until the load-cell limit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bench::{Bench, ProbeTrajectory, Waypoint};
use super::report::{csv_string, parse_csv, Check, CsvArtifact, ExperimentReport};
use super::{default_target, mean, std_dev, ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::pipeline::fit_sensitivity;
use crate::topology::TaxelRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub patch: u32,
    pub target: TaxelRef,
    pub probe_diameter_mm: f64,
    pub step_mm: f64,
    pub force_limit_n: f64,
    pub dwell_s: f64,
    pub retract_s: f64,
    pub cycles: usize,
    pub wait_s: f64,
    pub baseline_ticks: usize,
    pub ranges_kpa: Vec<[f64; 2]>,
    /// Allowed relative slope error with noise.
    pub relative_tolerance: f64,
    /// Allowed absolute slope error without noise, fF/kPa.
    pub noise_free_tolerance: f64,
}

impl SensitivitySpec {
    pub fn for_config(config: &SkinConfig) -> Result<Self, HarnessError> {
        let (patch, target) = default_target(config)?;
        Ok(Self {
            patch,
            target,
            probe_diameter_mm: 7.0,
            step_mm: 0.2,
            force_limit_n: 4.9,
            dwell_s: 2.0,
            retract_s: 1.0,
            cycles: 15,
            wait_s: 900.0,
            baseline_ticks: crate::pipeline::DEFAULT_BASELINE_WINDOW,
            ranges_kpa: vec![[2.0, 45.0], [65.0, 160.0]],
            relative_tolerance: 0.03,
            noise_free_tolerance: 1e-6,
        })
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    cycle: usize,
    step: usize,
    #[allow(dead_code)]
    depth_mm: f64,
    pressure_kpa: f64,
    deltac_ff: f64,
}

#[derive(Debug, Deserialize)]
struct CycleStartRow {
    cycle: usize,
    relaxation_ff: f64,
    previous_peak_relaxation_ff: f64,
    wait_s: f64,
}

const HEADER: [&str; 9] = [
    "cycle", "step", "depth_mm", "tick", "time_s", "load_cell_n", "pressure_kpa", "counts", "deltac_ff",
];

pub fn run_indentation_sweep(config: &SkinConfig, spec: &SensitivitySpec, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    let kind = ExperimentKind::Sensitivity;
    let mut bench = Bench::new(config.clone(), spec.patch, spec.target, spec.probe_diameter_mm, options, kind.salt())?;
    let ch = spec.target.channel as usize;
    let lsb = bench.config().cdc.lsb_size_ff;
    let baseline = bench.capture_baseline(spec.baseline_ticks)[ch];
    let steps = bench.max_steps(spec.step_mm, spec.force_limit_n)?;
    if steps == 0 {
        return Err(HarnessError::InvalidProtocol("force limit admits no indentation step".into()));
    }
    let at = bench.target_position();
    let trajectory = ProbeTrajectory {
        waypoints: (1..=steps)
            .flat_map(|k| {
                [
                    Waypoint {
                        x_mm: at.x,
                        y_mm: at.y,
                        depth_mm: k as f64 * spec.step_mm,
                        dwell_s: spec.dwell_s,
                    },
                    Waypoint {
                        x_mm: at.x,
                        y_mm: at.y,
                        depth_mm: 0.0,
                        dwell_s: spec.retract_s,
                    },
                ]
            })
            .collect(),
        probe_diameter_mm: spec.probe_diameter_mm,
        inter_cycle_wait_s: spec.wait_s,
    };
    trajectory.validate(bench.thickness_mm())?;
    let slot = bench.config().patches[bench.patch_index]
        .slot(spec.target)
        .ok_or_else(|| HarnessError::InvalidTarget("target has no slot".into()))?;
    let area_m = bench.load_cell.area_mm2 * 1e-3;
    let material = bench.config().material.clone();
    let relaxation_now = |b: &Bench| b.sim.state(b.patch_index, slot).components(&material).relaxation;
    let mut rows = Vec::new();
    let mut starts = Vec::new();
    let mut peak_relaxation: f64 = 0.0;
    for cycle in 0..spec.cycles {
        let waited = if cycle > 0 { trajectory.inter_cycle_wait_s } else { 0.0 };
        bench.wait(waited);
        starts.push(vec![
            cycle.to_string(),
            relaxation_now(&bench).to_string(),
            peak_relaxation.to_string(),
            waited.to_string(),
        ]);
        peak_relaxation = 0.0;
        for (i, w) in trajectory.waypoints.iter().enumerate() {
            bench.press(at, spec.probe_diameter_mm, w.depth_mm)?;
            for _ in 0..bench.ticks_for(w.dwell_s) {
                let r = bench.tick();
                if w.depth_mm > 0.0 {
                    rows.push(vec![
                        cycle.to_string(),
                        (i / 2 + 1).to_string(),
                        w.depth_mm.to_string(),
                        r.tick.to_string(),
                        r.time_s.to_string(),
                        r.load_cell_n.to_string(),
                        (r.load_cell_n / area_m).to_string(),
                        r.counts[ch].to_string(),
                        ((r.counts[ch] - baseline) * lsb).to_string(),
                    ]);
                }
            }
            // Relaxation magnitude peaks at the end of a hold.
            peak_relaxation = peak_relaxation.max(relaxation_now(&bench).abs());
        }
    }
    let csv = vec![
        CsvArtifact {
            name: "sensitivity.csv".into(),
            content: csv_string(&HEADER, rows)?,
        },
        CsvArtifact {
            name: "sensitivity_cycle_start.csv".into(),
            content: csv_string(&["cycle", "relaxation_ff", "previous_peak_relaxation_ff", "wait_s"], starts)?,
        },
    ];
    let contents: Vec<String> = csv.iter().map(|c| c.content.clone()).collect();
    let (summary, checks) = summarize(config, spec, options, &contents)?;
    ExperimentReport::build(kind, options, spec, csv, summary, checks)
}

pub fn summarize(
    config: &SkinConfig,
    spec: &SensitivitySpec,
    options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    let rows: Vec<Row> = parse_csv(csv.first().map_or("", String::as_str))?;
    let starts: Vec<CycleStartRow> = parse_csv(csv.get(1).map_or("", String::as_str))?;
    let mut dwell: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &rows {
        let e = dwell.entry((r.cycle, r.step)).or_default();
        e.0.push(r.pressure_kpa);
        e.1.push(r.deltac_ff);
    }
    let mut per_step: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut samples = Vec::new();
    for ((_, step), (p, dc)) in &dwell {
        let (mp, mdc) = (mean(p), mean(dc));
        samples.push((mp, mdc));
        let e = per_step.entry(*step).or_default();
        e.0.push(mp);
        e.1.push(mdc);
    }
    let steps: Vec<serde_json::Value> = per_step
        .iter()
        .map(|(step, (p, dc))| {
            json!({
                "step": step,
                "pressure_kpa": mean(p),
                "deltac_mean_ff": mean(dc),
                "deltac_std_ff": std_dev(dc),
                "cycles": dc.len(),
            })
        })
        .collect();
    let max_std = per_step.values().map(|(_, dc)| std_dev(dc)).fold(0.0, f64::max);
    let ranges: Vec<(f64, f64)> = spec.ranges_kpa.iter().map(|r| (r[0], r[1])).collect();
    let fits = fit_sensitivity(&samples, &ranges)?;
    let mut checks = Vec::new();
    let mut fit_json = Vec::new();
    for f in &fits {
        let mid = (f.from_kpa + f.to_kpa) / 2.0;
        let expected = config
            .material
            .sensitivity_segments
            .iter()
            .find(|s| s.from_kpa <= mid && mid <= s.to_kpa)
            .map_or(f64::NAN, |s| s.slope_ff_per_kpa);
        let tol = if options.noise_free {
            spec.noise_free_tolerance
        } else {
            spec.relative_tolerance * expected
        };
        let name = format!("slope {}-{} kPa", f.from_kpa, f.to_kpa);
        checks.push(Check::within(&name, f.slope_ff_per_kpa, expected, tol));
        fit_json.push(json!({
            "from_kpa": f.from_kpa,
            "to_kpa": f.to_kpa,
            "slope_ff_per_kpa": f.slope_ff_per_kpa,
            "expected_ff_per_kpa": expected,
            "points": f.count,
        }));
    }
    let tau = config.material.relaxation_tau_s;
    let mut worst_start: f64 = 0.0;
    let mut start_ok = true;
    for s in starts.iter().filter(|s| s.cycle > 0) {
        let bound = s.previous_peak_relaxation_ff * (-s.wait_s / tau).exp();
        start_ok &= s.relaxation_ff.abs() <= bound;
        worst_start = worst_start.max(s.relaxation_ff.abs());
    }
    checks.push(Check::flag("relaxation decayed at cycle start", start_ok));
    if options.noise_free {
        checks.push(Check::at_most("max per-step std (fF)", max_std, 1e-9));
    }
    let summary = json!({
        "target": { "patch": spec.patch, "triangle": spec.target.triangle_id, "channel": spec.target.channel },
        "steps": steps,
        "step_count": per_step.len(),
        "max_step_std_ff": max_std,
        "fits": fit_json,
        "max_cycle_start_relaxation_ff": worst_start,
    });
    Ok((summary, checks))
}
