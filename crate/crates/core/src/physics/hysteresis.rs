use serde::{Deserialize, Serialize};

use super::material::MaterialModel;

/// Branch the play operator is currently tracing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    /// On the virgin curve; zero correction.
    Loading,
    /// Descending from the turning point; `scale <= 1` shrinks the full
    /// unloading curve after a partial reload.
    Unloading { scale: f64 },
    /// Ascending from a reversal at `from_kpa` back toward the turning point,
    /// where the correction reaches zero. Never above the full unloading curve.
    Reloading { from_kpa: f64, from_correction: f64 },
}

/// One-state play operator memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisMemory {
    /// Largest pressure reached since the last return to rest.
    pub turning_kpa: f64,
    pub last_kpa: f64,
    pub branch: Branch,
    pub correction_ff: f64,
}

impl Default for HysteresisMemory {
    fn default() -> Self {
        Self {
            turning_kpa: 0.0,
            last_kpa: 0.0,
            branch: Branch::Loading,
            correction_ff: 0.0,
        }
    }
}

/// Unimodal profile on `[0, full scale]`, zero at both ends, peak value
/// `hysteresis_profile_amplitude` at `hysteresis_peak_kpa`.
pub fn gap_bump(p: f64, material: &MaterialModel) -> f64 {
    let top = material.full_scale_kpa();
    let peak = material.hysteresis_peak_kpa;
    if !(p > 0.0 && p < top) {
        return 0.0;
    }
    let b = (top - peak) / peak;
    material.hysteresis_profile_amplitude * (p / peak) * ((top - p) / (top - peak)).powf(b)
}

/// Largest branch gap the operator can produce at pressure `p`.
pub fn gap_profile(p: f64, material: &MaterialModel) -> f64 {
    material.hysteresis_gap_fraction * material.full_scale_deltac() * gap_bump(p, material)
}

/// Excess of the unloading branch from `turning` over the loading curve at `p`.
/// Zero at `p = 0` and at `p = turning`, never above [`gap_profile`].
pub fn unloading_excess(p: f64, turning: f64, material: &MaterialModel) -> f64 {
    if turning <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    let u = gap_profile(p, material) - gap_profile(turning, material) * p / turning;
    u.max(0.0)
}

impl HysteresisMemory {
    /// Feeds the next pressure and returns the correction added to the static
    /// curve.
    pub fn apply(&mut self, p: f64, material: &MaterialModel) -> f64 {
        if p <= 0.0 {
            *self = Self::default();
            return 0.0;
        }
        let last = self.last_kpa;
        let correction = match self.branch {
            Branch::Loading => {
                if p >= last {
                    self.turning_kpa = self.turning_kpa.max(p);
                    0.0
                } else {
                    self.branch = Branch::Unloading { scale: 1.0 };
                    unloading_excess(p, self.turning_kpa, material)
                }
            }
            Branch::Unloading { scale } => {
                if p <= last {
                    scale * unloading_excess(p, self.turning_kpa, material)
                } else {
                    self.branch = Branch::Reloading {
                        from_kpa: last,
                        from_correction: self.correction_ff,
                    };
                    self.reload(p, material)
                }
            }
            Branch::Reloading { .. } => {
                if p >= last {
                    self.reload(p, material)
                } else {
                    let full = unloading_excess(last, self.turning_kpa, material);
                    let scale = if full > 0.0 {
                        (self.correction_ff / full).min(1.0)
                    } else {
                        0.0
                    };
                    self.branch = Branch::Unloading { scale };
                    scale * unloading_excess(p, self.turning_kpa, material)
                }
            }
        };
        self.last_kpa = p;
        self.correction_ff = correction;
        correction
    }

    fn reload(&mut self, p: f64, material: &MaterialModel) -> f64 {
        let Branch::Reloading {
            from_kpa,
            from_correction,
        } = self.branch
        else {
            return 0.0;
        };
        if p >= self.turning_kpa {
            self.branch = Branch::Loading;
            self.turning_kpa = p;
            0.0
        } else {
            let line = from_correction * (self.turning_kpa - p) / (self.turning_kpa - from_kpa);
            line.min(unloading_excess(p, self.turning_kpa, material))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_shape() {
        let m = MaterialModel::default();
        assert_eq!(gap_bump(0.0, &m), 0.0);
        assert_eq!(gap_bump(160.0, &m), 0.0);
        let peak = gap_bump(28.6, &m);
        assert!((peak - m.hysteresis_profile_amplitude).abs() < 1e-12);
        for p in [5.0, 20.0, 28.0, 29.2, 60.0, 150.0] {
            assert!(gap_bump(p, &m) < peak);
        }
    }

    #[test]
    fn virgin_loading_is_static() {
        let m = MaterialModel::default();
        let mut h = HysteresisMemory::default();
        for i in 0..=160 {
            assert_eq!(h.apply(i as f64, &m), 0.0);
        }
    }

    #[test]
    fn full_loop_closes_and_hits_reported_gap() {
        let m = MaterialModel::default();
        let mut h = HysteresisMemory::default();
        for i in 1..=160 {
            h.apply(i as f64, &m);
        }
        for i in (29..160).rev() {
            h.apply(i as f64, &m);
        }
        let at_peak = h.apply(28.6, &m);
        for i in (0..=28).rev() {
            h.apply(i as f64, &m);
        }
        assert!((at_peak - 9.1).abs() < 0.1, "gap {at_peak}");
        assert_eq!(h.correction_ff, 0.0);
        assert_eq!(h.branch, Branch::Loading);
    }

    #[test]
    fn zero_fraction_no_gap() {
        let m = MaterialModel {
            hysteresis_gap_fraction: 0.0,
            ..MaterialModel::default()
        };
        let mut h = HysteresisMemory::default();
        h.apply(100.0, &m);
        assert_eq!(h.apply(30.0, &m), 0.0);
    }

    #[test]
    fn reload_returns_to_virgin_curve() {
        let m = MaterialModel::default();
        let mut h = HysteresisMemory::default();
        h.apply(100.0, &m);
        let c50 = h.apply(50.0, &m);
        assert!(c50 > 0.0);
        let c75 = h.apply(75.0, &m);
        let expected = (c50 / 2.0).min(unloading_excess(75.0, 100.0, &m));
        assert!((c75 - expected).abs() < 1e-12);
        assert!(c75 > 0.0);
        assert_eq!(h.apply(100.0, &m), 0.0);
        assert_eq!(h.apply(120.0, &m), 0.0);
        assert_eq!(h.turning_kpa, 120.0);
    }

    proptest! {
        #[test]
        fn bounded_by_gap(path in proptest::collection::vec(0.0..160.0f64, 1..60)) {
            let m = MaterialModel::default();
            let bound = m.hysteresis_gap_fraction * m.full_scale_deltac();
            let mut h = HysteresisMemory::default();
            for p in path {
                let c = h.apply(p, &m);
                prop_assert!(c >= 0.0);
                prop_assert!(c <= gap_profile(p, &m) + 1e-12);
                prop_assert!(c <= bound);
            }
        }
    }
}
