use serde::{Deserialize, Serialize};

/// Exponential stress relaxation under constant deformation,
/// `sigma(t) = sigma0 * exp(-t / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    /// Stress at the last load change, kPa.
    pub sigma0: f64,
    /// Time since the last load change.
    pub clock_s: f64,
    pub tau_s: f64,
}

impl Relaxation {
    pub fn new(sigma0: f64, tau_s: f64) -> Self {
        Self {
            sigma0,
            clock_s: 0.0,
            tau_s,
        }
    }

    pub fn value(&self) -> f64 {
        relaxed_value(self.sigma0, self.clock_s, self.tau_s)
    }

    /// Restarts the decay from `sigma0`.
    pub fn restart(&mut self, sigma0: f64) {
        self.sigma0 = sigma0;
        self.clock_s = 0.0;
    }
}

pub fn relaxed_value(sigma0: f64, t_s: f64, tau_s: f64) -> f64 {
    sigma0 * (-t_s / tau_s).exp()
}

/// Advances the clock by `dt`; the state keeps its origin so successive steps
/// compose exactly.
pub fn step_relaxation(state: Relaxation, dt_s: f64) -> Relaxation {
    debug_assert!(dt_s >= 0.0);
    Relaxation {
        clock_s: state.clock_s + dt_s,
        ..state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TAU: f64 = 4680.0;

    #[test]
    fn one_tau_is_one_over_e() {
        let s = step_relaxation(Relaxation::new(100.0, TAU), TAU);
        assert!((s.value() - 100.0 / std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn two_tau() {
        let s = step_relaxation(Relaxation::new(100.0, TAU), 2.0 * TAU);
        assert!((s.value() - 13.53352832366127).abs() < 1e-12);
    }

    #[test]
    fn tiny_step_unchanged() {
        let s = step_relaxation(Relaxation::new(100.0, TAU), 1e-12);
        assert!((s.value() - 100.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn semigroup(sigma0 in 0.1..500.0f64, a in 1e-6..1e5f64, b in 1e-6..1e5f64) {
            let r = Relaxation::new(sigma0, TAU);
            let two = step_relaxation(step_relaxation(r, a), b).value();
            let one = step_relaxation(r, a + b).value();
            prop_assert!((two - one).abs() <= 1e-12 * one.abs().max(f64::MIN_POSITIVE));
        }
    }
}
