use std::collections::BTreeMap;

use super::{PipelineError, Recording};
use crate::topology::TaxelRef;

/// Two seconds at the default 25 Hz delivery rate.
pub const DEFAULT_BASELINE_WINDOW: usize = 50;

/// Start-up average of every channel, captured with no contact.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub window_ticks: usize,
    pub means: BTreeMap<TaxelRef, f64>,
}

impl Baseline {
    pub fn mean(&self, taxel: TaxelRef) -> Option<f64> {
        self.means.get(&taxel).copied()
    }
}

/// Mean of each channel over the first `window` ticks (all ticks if fewer).
pub fn capture_baseline(stream: &Recording, window: usize) -> Result<Baseline, PipelineError> {
    let n = window.max(1).min(stream.len());
    if n == 0 || stream.taxels.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let means = stream
        .taxels
        .iter()
        .enumerate()
        .map(|(j, t)| (*t, stream.rows[..n].iter().map(|r| r[j]).sum::<f64>() / n as f64))
        .collect();
    Ok(Baseline {
        window_ticks: n,
        means,
    })
}
