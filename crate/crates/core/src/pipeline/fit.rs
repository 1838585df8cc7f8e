use serde::Serialize;

use super::PipelineError;

/// Ordinary least-squares line `y = slope * x + intercept`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub from_kpa: f64,
    pub to_kpa: f64,
    pub slope_ff_per_kpa: f64,
    pub intercept_ff: f64,
    pub count: usize,
}

/// Least-squares sensitivity over each closed pressure range of
/// `(pressure kPa, deltaC fF)` samples.
pub fn fit_sensitivity(samples: &[(f64, f64)], ranges: &[(f64, f64)]) -> Result<Vec<SlopeFit>, PipelineError> {
    ranges
        .iter()
        .map(|&(from_kpa, to_kpa)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = samples
                .iter()
                .filter(|(p, _)| *p >= from_kpa && *p <= to_kpa)
                .copied()
                .unzip();
            let insufficient = PipelineError::InsufficientData {
                from_kpa,
                to_kpa,
                count: xs.len(),
            };
            let (slope, intercept) = ols(&xs, &ys).ok_or(insufficient)?;
            Ok(SlopeFit {
                from_kpa,
                to_kpa,
                slope_ff_per_kpa: slope,
                intercept_ff: intercept,
                count: xs.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationFit {
    pub sigma0: f64,
    pub tau_s: f64,
}

/// Log-linear least squares on `ln sigma(t) = ln sigma0 - t / tau`.
pub fn fit_relaxation(series: &[(f64, f64)]) -> Result<RelaxationFit, PipelineError> {
    if series.len() < 3 || series.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(PipelineError::NonPositiveSeries);
    }
    let ts: Vec<f64> = series.iter().map(|(t, _)| *t).collect();
    let logs: Vec<f64> = series.iter().map(|(_, v)| v.ln()).collect();
    let (slope, intercept) = ols(&ts, &logs).ok_or(PipelineError::NonDecaying)?;
    if !(slope < 0.0) {
        return Err(PipelineError::NonDecaying);
    }
    Ok(RelaxationFit {
        sigma0: intercept.exp(),
        tau_s: -1.0 / slope,
    })
}
