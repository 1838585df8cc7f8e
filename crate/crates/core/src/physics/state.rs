use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cdc::{sample_counts, CdcParams};
use super::hysteresis::HysteresisMemory;
use super::material::MaterialModel;
use super::relaxation::{step_relaxation, Relaxation};

/// Additive decomposition of a taxel's capacitance change, all in fF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCComponents {
    /// Static response to the commanded pressure plus hysteresis correction.
    pub elastic: f64,
    /// Change caused by stress relaxation since the last load change.
    pub relaxation: f64,
    pub temperature: f64,
}

impl DeltaCComponents {
    pub fn total(&self) -> f64 {
        self.elastic + self.relaxation + self.temperature
    }
}

/// Mechanical and thermal memory of one taxel.
///
/// Stress in the dielectric jumps by the commanded pressure change and then
/// relaxes; the capacitance follows the relaxed stress through the static
/// curve. Releasing the contact clears the stress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxelState {
    pub commanded_kpa: f64,
    pub stress: Relaxation,
    pub hysteresis: HysteresisMemory,
    pub hysteresis_deltac_ff: f64,
    pub temperature_deltac_ff: f64,
}

impl TaxelState {
    pub fn new(material: &MaterialModel) -> Self {
        Self {
            commanded_kpa: 0.0,
            stress: Relaxation::new(0.0, material.relaxation_tau_s),
            hysteresis: HysteresisMemory::default(),
            hysteresis_deltac_ff: 0.0,
            temperature_deltac_ff: 0.0,
        }
    }

    /// Applies a new instantaneous pressure.
    pub fn load(&mut self, p_kpa: f64, material: &MaterialModel) {
        let p = p_kpa.max(0.0);
        if p == self.commanded_kpa {
            return;
        }
        if p == 0.0 {
            self.stress.restart(0.0);
        } else {
            self.stress.restart(self.stress.value() + (p - self.commanded_kpa));
        }
        self.commanded_kpa = p;
        self.hysteresis_deltac_ff = self.hysteresis.apply(p, material);
    }

    pub fn advance(&mut self, dt_s: f64) {
        self.stress = step_relaxation(self.stress, dt_s);
    }

    /// Current stress in the dielectric under this taxel.
    pub fn stress_kpa(&self) -> f64 {
        self.stress.value()
    }

    pub fn components(&self, material: &MaterialModel) -> DeltaCComponents {
        let elastic_static = material.pressure_to_deltac_clamped(self.commanded_kpa);
        let relaxed_static = material.pressure_to_deltac_clamped(self.stress_kpa());
        DeltaCComponents {
            elastic: elastic_static + self.hysteresis_deltac_ff,
            relaxation: relaxed_static - elastic_static,
            temperature: self.temperature_deltac_ff,
        }
    }

    pub fn total_deltac(&self, material: &MaterialModel) -> f64 {
        material.pressure_to_deltac_clamped(self.stress_kpa()) + self.hysteresis_deltac_ff + self.temperature_deltac_ff
    }
}

/// Digitizes the taxel's current capacitance change.
pub fn sample_taxel<R: Rng + ?Sized>(state: &TaxelState, material: &MaterialModel, cdc: &CdcParams, rng: &mut R) -> u16 {
    sample_counts(state.total_deltac(material), cdc, rng)
}
