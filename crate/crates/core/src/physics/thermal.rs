use serde::{Deserialize, Serialize};

use crate::topology::TaxelDescriptor;

/// Number of drift groups: five for pressure taxels, one per thermal pad.
pub const DRIFT_GROUPS: usize = 7;

/// Linear temperature drift of the capacitance, one coefficient per drift group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    pub reference_temperature_c: f64,
    /// Entry `g - 1` holds the coefficient of drift group `g`, in fF/°C.
    pub group_coefficients_ff_per_c: Vec<f64>,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            reference_temperature_c: 25.0,
            group_coefficients_ff_per_c: vec![8.0, 6.0, 4.5, -3.0, 2.5, 5.0, 4.9],
        }
    }
}

impl ThermalModel {
    pub fn coefficient(&self, drift_group: u8) -> f64 {
        (drift_group as usize)
            .checked_sub(1)
            .and_then(|i| self.group_coefficients_ff_per_c.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.group_coefficients_ff_per_c.len() != DRIFT_GROUPS {
            out.push((
                "group_coefficients_ff_per_c".into(),
                format!("expected {DRIFT_GROUPS} entries, got {}", self.group_coefficients_ff_per_c.len()),
            ));
        }
        if self.group_coefficients_ff_per_c.iter().any(|c| !c.is_finite()) {
            out.push(("group_coefficients_ff_per_c".into(), "non-finite coefficient".into()));
        }
        if !self.reference_temperature_c.is_finite() {
            out.push(("reference_temperature_c".into(), "non-finite".into()));
        }
        out
    }
}

/// Capacitance change of `taxel` at ambient temperature `t_c`.
pub fn thermal_response(taxel: &TaxelDescriptor, t_c: f64, thermal: &ThermalModel) -> f64 {
    thermal.coefficient(taxel.drift_group) * (t_c - thermal.reference_temperature_c)
}
