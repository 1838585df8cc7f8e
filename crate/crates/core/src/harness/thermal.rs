//! No-contact temperature sweeps: calibrate on the way up, evaluate the
//! compensation on the way down, and repeat the down sweep with a press to
//! show the thermal pads ignore pressure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bench::Bench;
use super::report::{csv_string, Check, CsvArtifact, ExperimentReport};
use super::{default_target, ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::pipeline::{calibrate_gains, capture_baseline, compensate_recording, CalibrationTable, Recording};
use crate::topology::{Patch, TaxelRef, THERMAL_CHANNELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub patch: u32,
    /// Triangle the gains are calibrated on.
    pub calibration_triangle: u32,
    /// Triangle that reuses the calibration triangle's gains, if any.
    pub shared_triangle: Option<u32>,
    pub low_c: f64,
    pub high_c: f64,
    pub ramp_s: f64,
    /// Constant-temperature ticks before each ramp; also the baseline window.
    pub settle_ticks: usize,
    pub press_target: TaxelRef,
    pub press_depth_mm: f64,
    pub probe_diameter_mm: f64,
    pub max_residual_fraction: f64,
    pub max_shared_residual_fraction: f64,
    /// Relative tolerance of each gain against the ratio of configured drift
    /// coefficients.
    pub gain_tolerance: f64,
}

impl ThermalSpec {
    pub fn for_config(config: &SkinConfig) -> Result<Self, HarnessError> {
        let (patch, target) = default_target(config)?;
        let shared = config
            .patch(patch)
            .and_then(|p| p.triangles.iter().map(|t| t.id).find(|id| *id != target.triangle_id));
        Ok(Self {
            patch,
            calibration_triangle: target.triangle_id,
            shared_triangle: shared,
            low_c: 15.0,
            high_c: 40.0,
            ramp_s: 300.0,
            settle_ticks: crate::pipeline::DEFAULT_BASELINE_WINDOW,
            press_target: target,
            press_depth_mm: 0.6,
            probe_diameter_mm: 7.0,
            max_residual_fraction: 0.10,
            max_shared_residual_fraction: 0.15,
            gain_tolerance: 0.02,
        })
    }

    fn triangles(&self) -> Vec<u32> {
        let mut t = vec![self.calibration_triangle];
        t.extend(self.shared_triangle.filter(|s| *s != self.calibration_triangle));
        t
    }
}

const UP: &str = "thermal_up.csv";
const DOWN: &str = "thermal_down.csv";
const PRESSED: &str = "thermal_down_pressed.csv";
const COMPENSATED: &str = "thermal_compensated.csv";

/// Runs the settle phase and a linear ramp from `from_c` to `to_c`. The probe
/// presses during the middle third of the ramp when `press` is set.
fn sweep(
    bench: &mut Bench,
    spec: &ThermalSpec,
    triangles: &[u32],
    from_c: f64,
    to_c: f64,
    press: bool,
) -> Result<Recording, HarnessError> {
    let patch = bench.config().patches[bench.patch_index].clone();
    let positions: Vec<(usize, u32)> = triangles
        .iter()
        .map(|id| {
            patch
                .triangles
                .iter()
                .position(|t| t.id == *id)
                .map(|p| (p, *id))
                .ok_or_else(|| HarnessError::InvalidTarget(format!("no triangle {id}")))
        })
        .collect::<Result<_, _>>()?;
    let ramp = bench.ticks_for(spec.ramp_s).max(1);
    let at = patch
        .taxel_world_position(spec.press_target.triangle_id, spec.press_target.channel)
        .map_err(|e| HarnessError::InvalidTarget(e.to_string()))?;
    let mut samples = Vec::new();
    for k in 0..spec.settle_ticks + ramp {
        let ramp_k = k.saturating_sub(spec.settle_ticks);
        let f = ramp_k as f64 / (ramp - 1).max(1) as f64;
        bench.set_temperature(from_c + f * (to_c - from_c));
        if press && k >= spec.settle_ticks {
            if ramp_k == ramp / 3 {
                bench.press(at, spec.probe_diameter_mm, spec.press_depth_mm)?;
            } else if ramp_k == 2 * ramp / 3 {
                bench.release();
            }
        }
        let (tick, frames) = bench.tick_patch();
        for &(pos, id) in &positions {
            for (ch, v) in frames[pos].iter().enumerate() {
                samples.push((tick, TaxelRef::new(id, ch as u8), *v));
            }
        }
    }
    bench.release();
    Ok(Recording::from_samples(samples)?)
}

/// Bus sample CSV; the triangle column holds bus indices, as on the wire.
fn to_csv(rec: &Recording, patch: &Patch, rate: f64) -> Result<String, HarnessError> {
    let rec = rec.relabel_triangles(|id| patch.triangle(id).map(|t| t.bus_index() as u32))?;
    let mut out = Vec::new();
    rec.write_sample_csv(&mut out, patch.id as u8, rate)?;
    Ok(String::from_utf8(out).expect("csv output is UTF-8"))
}

pub fn run_thermal_sweep(config: &SkinConfig, spec: &ThermalSpec, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    if !(spec.ramp_s > 0.0) {
        return Err(HarnessError::InvalidProtocol("ramp duration must be > 0".into()));
    }
    let kind = ExperimentKind::Thermal;
    let triangles = spec.triangles();
    let rate = config.sample_rate_hz;
    let new_bench = || Bench::new(config.clone(), spec.patch, spec.press_target, spec.probe_diameter_mm, options, kind.salt());
    let mut bench = new_bench()?;
    let up = sweep(&mut bench, spec, &triangles, spec.low_c, spec.high_c, false)?;
    let down = sweep(&mut bench, spec, &triangles, spec.high_c, spec.low_c, false)?;
    // The twin replays the same noise stream with a press added.
    let mut twin = new_bench()?;
    sweep(&mut twin, spec, &triangles, spec.low_c, spec.high_c, false)?;
    let pressed = sweep(&mut twin, spec, &triangles, spec.high_c, spec.low_c, true)?;

    let patch = config
        .patch(spec.patch)
        .ok_or_else(|| HarnessError::InvalidTarget(format!("no patch {}", spec.patch)))?;
    let table = calibrate_gains(&only(&up, spec.calibration_triangle))?;
    let mut comp_rows = Vec::new();
    for (name, rec) in [("up", &up), ("down", &down)] {
        let rec = only(rec, spec.calibration_triangle);
        let baseline = capture_baseline(&rec, spec.settle_ticks)?;
        let comp = compensate_recording(&rec, &baseline, &table)?;
        for ((tick, raw), c) in rec.ticks.iter().zip(&rec.rows).zip(&comp.rows) {
            for ((t, r), v) in rec.taxels.iter().zip(raw).zip(c) {
                comp_rows.push(vec![
                    tick.to_string(),
                    name.to_string(),
                    t.triangle_id.to_string(),
                    t.channel.to_string(),
                    r.to_string(),
                    v.to_string(),
                ]);
            }
        }
    }
    let csv = vec![
        CsvArtifact {
            name: UP.into(),
            content: to_csv(&up, patch, rate)?,
        },
        CsvArtifact {
            name: DOWN.into(),
            content: to_csv(&down, patch, rate)?,
        },
        CsvArtifact {
            name: PRESSED.into(),
            content: to_csv(&pressed, patch, rate)?,
        },
        CsvArtifact {
            name: COMPENSATED.into(),
            content: csv_string(&["tick", "sweep", "triangle", "channel", "raw", "compensated"], comp_rows)?,
        },
    ];
    let contents: Vec<String> = csv.iter().map(|c| c.content.clone()).collect();
    let (summary, checks) = summarize(config, spec, options, &contents)?;
    ExperimentReport::build(kind, options, spec, csv, summary, checks)
}

/// Columns of one triangle.
fn only(rec: &Recording, triangle: u32) -> Recording {
    let cols: Vec<usize> = (0..rec.taxels.len()).filter(|&j| rec.taxels[j].triangle_id == triangle).collect();
    Recording {
        taxels: cols.iter().map(|&j| rec.taxels[j]).collect(),
        ticks: rec.ticks.clone(),
        rows: rec.rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(),
    }
}

/// Per pressure taxel: (max |raw - baseline|, max |compensated - baseline|).
fn drift_and_residual(
    rec: &Recording,
    table: &CalibrationTable,
    settle: usize,
) -> Result<BTreeMap<TaxelRef, (f64, f64)>, HarnessError> {
    let baseline = capture_baseline(rec, settle)?;
    let comp = compensate_recording(rec, &baseline, table)?;
    let mut out = BTreeMap::new();
    for (j, t) in rec.taxels.iter().enumerate() {
        if THERMAL_CHANNELS.contains(&t.channel) {
            continue;
        }
        let b = baseline.mean(*t).unwrap_or(0.0);
        let raw = rec.series(j).map(|v| (v - b).abs()).fold(0.0, f64::max);
        let res = comp.series(j).map(|v| (v - b).abs()).fold(0.0, f64::max);
        out.insert(*t, (raw, res));
    }
    Ok(out)
}

pub fn summarize(
    config: &SkinConfig,
    spec: &ThermalSpec,
    options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    let patch = config
        .patch(spec.patch)
        .ok_or_else(|| HarnessError::InvalidTarget(format!("no patch {}", spec.patch)))?;
    let read = |i: usize| -> Result<Recording, HarnessError> {
        let rec = Recording::read_sample_csv(csv.get(i).map_or("", String::as_str).as_bytes(), patch.id as u8)?;
        Ok(rec.relabel_triangles(|index| patch.triangle_at_bus_index(index).map(|t| t.id))?)
    };
    let (up, down, pressed) = (read(0)?, read(1)?, read(2)?);
    let table = calibrate_gains(&only(&up, spec.calibration_triangle))?;
    let mut checks = Vec::new();

    let thermal = &config.material.thermal;
    let coefficient = |t: TaxelRef| patch.taxel(t).map_or(f64::NAN, |d| thermal.coefficient(d.drift_group));
    let mut worst_gain: f64 = 0.0;
    let mut gains_json = Vec::new();
    for e in table.entries.values() {
        let expected = coefficient(e.taxel()) / coefficient(e.reference());
        let rel = ((e.gain - expected) / expected).abs();
        worst_gain = worst_gain.max(rel);
        gains_json.push(json!({
            "triangle": e.triangle, "channel": e.channel, "reference_channel": e.reference_channel,
            "gain": e.gain, "expected": expected, "residual_counts": e.residual,
        }));
    }
    checks.push(Check::at_most("worst relative gain error", worst_gain, spec.gain_tolerance));

    let mut sweeps_json = serde_json::Map::new();
    for (name, rec) in [("up", &up), ("down", &down)] {
        let stats = drift_and_residual(&only(rec, spec.calibration_triangle), &table, spec.settle_ticks)?;
        let worst = stats.values().map(|(raw, res)| res / raw).fold(0.0, f64::max);
        checks.push(Check::at_most(&format!("worst residual / drift, {name} sweep"), worst, spec.max_residual_fraction));
        sweeps_json.insert(
            name.into(),
            json!({
                "worst_fraction": worst,
                "taxels": stats.iter().map(|(t, (raw, res))| json!({
                    "channel": t.channel, "max_drift_counts": raw, "max_residual_counts": res,
                })).collect::<Vec<_>>(),
            }),
        );
    }

    let shared_json = match spec.shared_triangle.filter(|s| *s != spec.calibration_triangle) {
        Some(other) => {
            let moved = table.retarget(spec.calibration_triangle, other);
            let mut worst: f64 = 0.0;
            for rec in [&up, &down] {
                let stats = drift_and_residual(&only(rec, other), &moved, spec.settle_ticks)?;
                worst = stats.values().map(|(raw, res)| res / raw).fold(worst, f64::max);
            }
            checks.push(Check::at_most("worst residual / drift with shared gains", worst, spec.max_shared_residual_fraction));
            json!({ "triangle": other, "worst_fraction": worst })
        }
        None => serde_json::Value::Null,
    };

    // Thermal pads must not see the press; pressure taxels must.
    let mut pads_identical = down.ticks == pressed.ticks && down.taxels == pressed.taxels;
    let mut press_seen: f64 = 0.0;
    if pads_identical {
        for (j, t) in down.taxels.iter().enumerate() {
            let same = down.series(j).zip(pressed.series(j)).all(|(a, b)| a.to_bits() == b.to_bits());
            if THERMAL_CHANNELS.contains(&t.channel) {
                pads_identical &= same;
            } else {
                let d = down.series(j).zip(pressed.series(j)).map(|(a, b)| b - a).fold(0.0, f64::max);
                press_seen = press_seen.max(d);
            }
        }
    }
    checks.push(Check::flag("thermal pads unchanged under pressure", pads_identical));
    checks.push(Check::above("largest press response (counts)", press_seen, 0.0));

    if options.noise_free {
        // Same drift group, same trace.
        let mut groups: BTreeMap<(u32, u8), Vec<usize>> = BTreeMap::new();
        for (j, t) in up.taxels.iter().enumerate() {
            if let Some(d) = patch.taxel(*t) {
                groups.entry((t.triangle_id, d.drift_group)).or_default().push(j);
            }
        }
        let same = groups
            .values()
            .all(|cols| cols.windows(2).all(|w| up.series(w[0]).eq(up.series(w[1]))));
        checks.push(Check::flag("drift groups share raw traces", same));
    }

    let summary = json!({
        "calibration_triangle": spec.calibration_triangle,
        "ticks_per_sweep": up.len(),
        "gains": gains_json,
        "sweeps": sweeps_json,
        "shared": shared_json,
        "largest_press_response_counts": press_seen,
    });
    Ok((summary, checks))
}
