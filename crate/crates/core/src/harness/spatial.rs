//! Interleaved line scan: a forward pass in 0.4 mm steps and a return pass
//! offset by 0.2 mm, repeated for each probe diameter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bench::Bench;
use super::report::{csv_string, parse_csv, Check, CsvArtifact, ExperimentReport};
use super::{default_target, mean, ExperimentKind, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::pipeline::{detect_contacts, DetectionParams};
use crate::topology::{Point2, TaxelKind, TaxelRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialScanSpec {
    pub patch: u32,
    /// Taxel whose receptive-field width is compared across probes.
    pub target: TaxelRef,
    pub start_mm: Point2,
    pub end_mm: Point2,
    pub step_mm: f64,
    pub return_offset_mm: f64,
    pub depth_mm: f64,
    pub probe_diameters_mm: Vec<f64>,
    pub repetitions: usize,
    pub dwell_s: f64,
    pub release_s: f64,
    pub baseline_ticks: usize,
    pub max_mean_error_mm: f64,
}

impl SpatialScanSpec {
    /// Segment along x through the default target, two pitches either side.
    pub fn for_config(config: &SkinConfig) -> Result<Self, HarnessError> {
        let (patch, target) = default_target(config)?;
        let centre = config
            .patch(patch)
            .and_then(|p| p.taxel_world_position(target.triangle_id, target.channel).ok())
            .ok_or_else(|| HarnessError::InvalidTarget("default target has no position".into()))?;
        let half = 5.6;
        Ok(Self {
            patch,
            target,
            start_mm: Point2::new(centre.x - half, centre.y),
            end_mm: Point2::new(centre.x + half, centre.y),
            step_mm: 0.4,
            return_offset_mm: 0.2,
            depth_mm: 0.6,
            probe_diameters_mm: vec![2.0, 7.0],
            repetitions: 3,
            dwell_s: 1.0,
            release_s: 0.5,
            baseline_ticks: crate::pipeline::DEFAULT_BASELINE_WINDOW,
            max_mean_error_mm: 0.2,
        })
    }

    fn length_mm(&self) -> f64 {
        self.start_mm.distance(self.end_mm)
    }

    fn point_at(&self, s_mm: f64) -> Point2 {
        let l = self.length_mm();
        let f = if l > 0.0 { s_mm / l } else { 0.0 };
        Point2::new(
            self.start_mm.x + f * (self.end_mm.x - self.start_mm.x),
            self.start_mm.y + f * (self.end_mm.y - self.start_mm.y),
        )
    }

    /// Arc positions in visiting order, each tagged forward (true) or return.
    pub fn scan_order(&self) -> Vec<(bool, f64)> {
        let l = self.length_mm();
        let n = (l / self.step_mm + 1e-9).floor() as usize;
        let forward = (0..=n).map(|k| (true, k as f64 * self.step_mm));
        let last = n as f64 * self.step_mm;
        let back = (0..)
            .map(move |k| last - self.return_offset_mm - k as f64 * self.step_mm)
            .take_while(|s| *s >= -1e-9)
            .map(|s| (false, s));
        forward.chain(back).collect()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    probe: usize,
    probe_mm: f64,
    rep: usize,
    index: usize,
    s_mm: f64,
    x_mm: f64,
    y_mm: f64,
    triangle: u32,
    channel: u8,
    response_counts: f64,
}

/// Responses of one taxel keyed by grid position, with the arc position.
type Curve = BTreeMap<i64, (f64, Vec<f64>)>;
/// Commanded position and every taxel's response at one probe stop.
type Frame = (Point2, Vec<(TaxelRef, f64)>);

const HEADER: [&str; 11] = [
    "probe", "probe_mm", "rep", "pass", "index", "s_mm", "x_mm", "y_mm", "triangle", "channel", "response_counts",
];

pub fn run_spatial_scan(config: &SkinConfig, spec: &SpatialScanSpec, options: HarnessOptions) -> Result<ExperimentReport, HarnessError> {
    let kind = ExperimentKind::SpatialScan;
    if !(spec.step_mm > 0.0 && spec.return_offset_mm >= 0.0 && spec.dwell_s > 0.0) {
        return Err(HarnessError::InvalidProtocol("scan step and dwell must be > 0".into()));
    }
    if spec.probe_diameters_mm.iter().any(|d| !(*d > 0.0)) {
        return Err(HarnessError::InvalidProtocol("probe diameter must be > 0".into()));
    }
    let order = spec.scan_order();
    {
        let patch = config
            .patch(spec.patch)
            .ok_or_else(|| HarnessError::InvalidTarget(format!("no patch {}", spec.patch)))?;
        for &(_, s) in &order {
            let p = spec.point_at(s);
            if !patch.contains(p) {
                return Err(HarnessError::SegmentOutOfBounds { x: p.x, y: p.y });
            }
        }
    }
    let first_probe = spec.probe_diameters_mm.first().copied().unwrap_or(1.0);
    let mut bench = Bench::new(config.clone(), spec.patch, spec.target, first_probe, options, kind.salt())?;
    let pressure: Vec<(usize, TaxelRef)> = {
        let patch = &bench.config().patches[bench.patch_index];
        let mut out = Vec::new();
        for (pos, tri) in patch.triangles.iter().enumerate() {
            for t in tri.taxels.iter().filter(|t| t.kind == TaxelKind::Pressure) {
                out.push((pos, t.taxel_ref()));
            }
        }
        out
    };
    let dwell_ticks = bench.ticks_for(spec.dwell_s).max(1);
    let mean_frames = |b: &mut Bench, n: usize| -> Vec<[f64; 12]> {
        let mut acc: Vec<[f64; 12]> = Vec::new();
        for _ in 0..n {
            let (_, frames) = b.tick_patch();
            if acc.is_empty() {
                acc = vec![[0.0; 12]; frames.len()];
            }
            for (a, f) in acc.iter_mut().zip(&frames) {
                for (x, y) in a.iter_mut().zip(f) {
                    *x += y;
                }
            }
        }
        acc.iter().map(|a| a.map(|x| x / n as f64)).collect()
    };
    let baseline = mean_frames(&mut bench, spec.baseline_ticks.max(1));
    let mut rows = Vec::new();
    for (pi, &diameter) in spec.probe_diameters_mm.iter().enumerate() {
        for rep in 0..spec.repetitions {
            for (index, &(forward, s)) in order.iter().enumerate() {
                let at = spec.point_at(s);
                bench.press(at, diameter, spec.depth_mm)?;
                let means = mean_frames(&mut bench, dwell_ticks);
                bench.release();
                bench.wait(spec.release_s);
                for &(pos, t) in &pressure {
                    let ch = t.channel as usize;
                    rows.push(vec![
                        pi.to_string(),
                        diameter.to_string(),
                        rep.to_string(),
                        if forward { "forward" } else { "return" }.to_string(),
                        index.to_string(),
                        s.to_string(),
                        at.x.to_string(),
                        at.y.to_string(),
                        t.triangle_id.to_string(),
                        t.channel.to_string(),
                        (means[pos][ch] - baseline[pos][ch]).to_string(),
                    ]);
                }
            }
        }
    }
    let csv = vec![CsvArtifact {
        name: "spatial_scan.csv".into(),
        content: csv_string(&HEADER, rows)?,
    }];
    let contents: Vec<String> = csv.iter().map(|c| c.content.clone()).collect();
    let (summary, checks) = summarize(config, spec, options, &contents)?;
    ExperimentReport::build(kind, options, spec, csv, summary, checks)
}

/// Width at half maximum of a curve sampled at increasing `xs`, with linear
/// interpolation of the crossings. A side that never falls below half is
/// clipped at the curve end.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> f64 {
    let Some((imax, &peak)) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0.0;
    };
    if !(peak > 0.0) {
        return 0.0;
    }
    let half = peak / 2.0;
    let cross = |i: usize, j: usize| {
        let t = (half - ys[i]) / (ys[j] - ys[i]);
        xs[i] + t * (xs[j] - xs[i])
    };
    let mut left = xs[0];
    if let Some(i) = (0..imax).rev().find(|&i| ys[i] < half) {
        left = cross(i, i + 1);
    }
    let mut right = xs[xs.len() - 1];
    if let Some(i) = (imax + 1..ys.len()).find(|&i| ys[i] < half) {
        right = cross(i - 1, i);
    }
    right - left
}

/// Largest rise after the peak or fall before it; 0 for a unimodal curve.
pub fn unimodality_violation(ys: &[f64]) -> f64 {
    let Some(imax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i) else {
        return 0.0;
    };
    let mut worst: f64 = 0.0;
    for w in ys[..=imax].windows(2) {
        worst = worst.max(w[0] - w[1]);
    }
    for w in ys[imax..].windows(2) {
        worst = worst.max(w[1] - w[0]);
    }
    worst
}

pub fn summarize(
    config: &SkinConfig,
    spec: &SpatialScanSpec,
    options: HarnessOptions,
    csv: &[String],
) -> Result<(serde_json::Value, Vec<Check>), HarnessError> {
    let rows: Vec<Row> = parse_csv(csv.first().map_or("", String::as_str))?;
    let patch = config
        .patch(spec.patch)
        .ok_or_else(|| HarnessError::InvalidTarget(format!("no patch {}", spec.patch)))?;
    let mut cdc = config.cdc.clone();
    if options.noise_free {
        cdc.noise_std_counts = 0.0;
    }
    let dwell_ticks = (spec.dwell_s * config.sample_rate_hz).round().max(1.0);
    let mut params = DetectionParams::for_cdc(&cdc);
    params.threshold_counts /= dwell_ticks.sqrt();
    // Adjacent points are means of `repetitions * dwell` samples carrying
    // Gaussian plus rounding noise; their difference gets five deviations.
    let slack = if options.noise_free {
        1e-9
    } else {
        let per_sample = (cdc.effective_noise_std().powi(2) + 1.0 / 12.0).sqrt();
        5.0 * std::f64::consts::SQRT_2 * per_sample / (dwell_ticks * spec.repetitions.max(1) as f64).sqrt()
    };
    let dir = {
        let l = spec.start_mm.distance(spec.end_mm).max(f64::MIN_POSITIVE);
        Point2::new((spec.end_mm.x - spec.start_mm.x) / l, (spec.end_mm.y - spec.start_mm.y) / l)
    };

    // Per probe: curves keyed by taxel, points keyed by position on the 0.2 mm grid.
    let grid = if spec.return_offset_mm > 0.0 { spec.return_offset_mm } else { spec.step_mm };
    let mut curves: BTreeMap<(usize, TaxelRef), Curve> = BTreeMap::new();
    let mut frames: BTreeMap<(usize, usize, usize), Frame> = BTreeMap::new();
    let mut probe_mm: BTreeMap<usize, f64> = BTreeMap::new();
    for r in &rows {
        let t = TaxelRef::new(r.triangle, r.channel);
        probe_mm.insert(r.probe, r.probe_mm);
        curves
            .entry((r.probe, t))
            .or_default()
            .entry((r.s_mm / grid).round() as i64)
            .or_insert_with(|| (r.s_mm, Vec::new()))
            .1
            .push(r.response_counts);
        frames
            .entry((r.probe, r.rep, r.index))
            .or_insert_with(|| (Point2::new(r.x_mm, r.y_mm), Vec::new()))
            .1
            .push((t, r.response_counts));
    }

    let mut worst_violation: f64 = 0.0;
    let mut unimodal = true;
    let mut checked_curves = 0usize;
    let mut widths: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(probe, taxel), pts) in &curves {
        let xs: Vec<f64> = pts.values().map(|(s, _)| *s).collect();
        let ys: Vec<f64> = pts.values().map(|(_, v)| mean(v)).collect();
        let peak = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if peak > params.threshold_counts {
            checked_curves += 1;
            let v = unimodality_violation(&ys);
            worst_violation = worst_violation.max(v);
            unimodal &= v <= slack;
        }
        if taxel == spec.target {
            widths.insert(probe, fwhm(&xs, &ys));
        }
    }

    let mut errors: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut cross: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut missed = 0usize;
    for (&(probe, _, _), (at, devs)) in &frames {
        let regions = detect_contacts(patch, devs, &params);
        let best = regions.iter().max_by(|a, b| {
            let sa: f64 = a.members.iter().map(|m| m.1).sum();
            let sb: f64 = b.members.iter().map(|m| m.1).sum();
            sa.total_cmp(&sb)
        });
        let Some(region) = best else {
            missed += 1;
            continue;
        };
        let Some(est) = crate::pipeline::localize_contact(region, patch, &config.material, &cdc) else {
            missed += 1;
            continue;
        };
        let dx = est.centroid_mm.x - at.x;
        let dy = est.centroid_mm.y - at.y;
        errors.entry(probe).or_default().push((dx * dir.x + dy * dir.y).abs());
        cross.entry(probe).or_default().push((-dx * dir.y + dy * dir.x).abs());
    }

    let mut checks = vec![
        Check::flag("every responding taxel unimodal", unimodal && checked_curves > 0),
        Check::flag("every scan position localized", missed == 0),
    ];
    let mut probes_json = Vec::new();
    for (&probe, &d) in &probe_mm {
        let e = errors.get(&probe).map_or(f64::NAN, |v| mean(v));
        checks.push(Check::at_most(&format!("mean centroid error, {d} mm probe (mm)"), e, spec.max_mean_error_mm));
        probes_json.push(json!({
            "probe_mm": d,
            "target_fwhm_mm": widths.get(&probe),
            "mean_error_mm": e,
            "max_error_mm": errors.get(&probe).map_or(f64::NAN, |v| v.iter().copied().fold(0.0, f64::max)),
            "mean_cross_track_mm": cross.get(&probe).map_or(f64::NAN, |v| mean(v)),
        }));
    }
    // Width must grow with probe diameter.
    let by_size: Vec<(f64, f64)> = probe_mm
        .iter()
        .filter_map(|(p, d)| widths.get(p).map(|w| (*d, *w)))
        .collect();
    let mut sorted = by_size.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let growing = sorted.len() >= 2 && sorted.windows(2).all(|w| w[1].1 > w[0].1);
    checks.push(Check::flag("target FWHM grows with probe diameter", growing));
    let summary = json!({
        "target": { "patch": spec.patch, "triangle": spec.target.triangle_id, "channel": spec.target.channel },
        "positions": spec.scan_order().len(),
        "threshold_counts": params.threshold_counts,
        "curves_checked": checked_curves,
        "worst_unimodality_violation_counts": worst_violation,
        "unimodality_slack_counts": slack,
        "missed_positions": missed,
        "probes": probes_json,
    });
    Ok((summary, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_order_interleaves() {
        let config = SkinConfig::preset("flat-prototype").unwrap();
        let spec = SpatialScanSpec::for_config(&config).unwrap();
        let order = spec.scan_order();
        assert_eq!(order.len(), 57);
        assert_eq!(order[0], (true, 0.0));
        assert!((order[28].1 - 11.2).abs() < 1e-9);
        assert!(!order[29].0 && (order[29].1 - 11.0).abs() < 1e-9);
        assert!((order[56].1 - 0.2).abs() < 1e-9);
        let mut grid: Vec<i64> = order.iter().map(|(_, s)| (s / 0.2).round() as i64).collect();
        grid.sort();
        assert_eq!(grid, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn fwhm_of_triangle_bump() {
        let xs: Vec<f64> = (0..=20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (10.0 - (x - 10.0).abs()).max(0.0)).collect();
        assert!((fwhm(&xs, &ys) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn unimodality_detects_second_peak() {
        assert_eq!(unimodality_violation(&[0.0, 1.0, 3.0, 2.0, 0.0]), 0.0);
        assert_eq!(unimodality_violation(&[0.0, 2.0, 1.0, 3.0, 0.0]), 1.0);
    }

    #[test]
    fn segment_off_patch_rejected() {
        let config = SkinConfig::preset("single-triangle").unwrap();
        let mut spec = SpatialScanSpec::for_config(&config).unwrap();
        spec.end_mm = Point2::new(100.0, spec.end_mm.y);
        assert!(matches!(
            run_spatial_scan(&config, &spec, HarnessOptions::default()),
            Err(HarnessError::SegmentOutOfBounds { .. })
        ));
    }
}
