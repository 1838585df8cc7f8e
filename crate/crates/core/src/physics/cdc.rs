use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Capacitance-to-digital converter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdcParams {
    pub bit_depth: u8,
    pub lsb_size_ff: f64,
    /// Reading at zero capacitance change.
    pub baseline_counts: f64,
    /// Internal conversions averaged into one delivered sample.
    pub averaging_window: u32,
    /// Noise of a single conversion; the delivered std is this over sqrt(window).
    pub noise_std_counts: f64,
}

impl Default for CdcParams {
    fn default() -> Self {
        Self {
            bit_depth: 16,
            // Full-scale response spans 256 counts: an 8-bit effective range.
            lsb_size_ff: 0.89,
            baseline_counts: 32768.0,
            averaging_window: 4,
            noise_std_counts: 1.0,
        }
    }
}

impl CdcParams {
    pub fn max_counts(&self) -> f64 {
        ((1u32 << self.bit_depth.min(16)) - 1) as f64
    }

    /// Standard deviation of a delivered sample.
    pub fn effective_noise_std(&self) -> f64 {
        self.noise_std_counts / (self.averaging_window.max(1) as f64).sqrt()
    }

    /// Noise-free, unquantized reading for a capacitance change.
    pub fn ideal_counts(&self, deltac_ff: f64) -> f64 {
        self.baseline_counts + deltac_ff / self.lsb_size_ff
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !(1..=16).contains(&self.bit_depth) {
            out.push(("bit_depth".into(), format!("{} not in 1..=16", self.bit_depth)));
        }
        if !(self.lsb_size_ff > 0.0 && self.lsb_size_ff.is_finite()) {
            out.push(("lsb_size_ff".into(), "must be > 0".into()));
        }
        if self.averaging_window < 1 {
            out.push(("averaging_window".into(), "must be >= 1".into()));
        }
        if !(self.noise_std_counts >= 0.0 && self.noise_std_counts.is_finite()) {
            out.push(("noise_std_counts".into(), "must be >= 0".into()));
        }
        if !(self.baseline_counts >= 0.0 && self.baseline_counts <= self.max_counts()) {
            out.push(("baseline_counts".into(), "outside the converter range".into()));
        }
        out
    }
}

/// Digitizes one capacitance change: baseline plus scaled signal plus
/// averaged Gaussian noise, rounded and clamped to the converter range.
/// The generator is only consumed when the noise is non-zero.
pub fn sample_counts<R: Rng + ?Sized>(deltac_ff: f64, cdc: &CdcParams, rng: &mut R) -> u16 {
    let std = cdc.effective_noise_std();
    let noise = if std > 0.0 {
        Normal::new(0.0, std).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    };
    let v = (cdc.ideal_counts(deltac_ff) + noise).round();
    v.clamp(0.0, cdc.max_counts()) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> CdcParams {
        CdcParams {
            noise_std_counts: 0.0,
            ..CdcParams::default()
        }
    }

    #[test]
    fn zero_change_is_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_counts(0.0, &quiet(), &mut rng), 32768);
    }

    #[test]
    fn one_lsb() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = quiet();
        assert_eq!(sample_counts(c.lsb_size_ff, &c, &mut rng), 32769);
    }

    #[test]
    fn saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_counts(1e9, &quiet(), &mut rng), 65535);
        assert_eq!(sample_counts(-1e9, &quiet(), &mut rng), 0);
    }

    #[test]
    fn averaging_shrinks_noise() {
        let c = CdcParams {
            noise_std_counts: 8.0,
            averaging_window: 16,
            ..CdcParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20000;
        let xs: Vec<f64> = (0..n).map(|_| sample_counts(0.0, &c, &mut rng) as f64 - 32768.0).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Rounding adds 1/12 count^2 of variance.
        assert!((var - (4.0 + 1.0 / 12.0)).abs() < 0.25, "{var}");
    }

    #[test]
    fn seeded_determinism() {
        let c = CdcParams::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..100).map(|i| sample_counts(i as f64, &c, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn default_full_scale_spans_eight_bits() {
        let full = crate::physics::MaterialModel::default().full_scale_deltac();
        let span = full / CdcParams::default().lsb_size_ff;
        assert!((span - 256.0).abs() < 1.0);
    }
}
