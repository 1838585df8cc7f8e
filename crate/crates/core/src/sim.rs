//! Whole-skin simulation stepped in simulated time, plus declarative stimulus
//! timelines.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SkinConfig;
use crate::physics::{
    apply_spatial_spread, sample_counts, thermal_response, Contact, PhysicsError, PressureMap, TaxelState,
};
use crate::topology::{Point2, TaxelKind, CHANNELS_PER_TRIANGLE};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown patch {0}")]
    UnknownPatch(u32),
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// How counts are produced from capacitance changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquisition {
    /// Noisy, rounded 16-bit conversions.
    Quantized,
    /// Exact `baseline + deltaC / lsb` without noise or rounding.
    Ideal,
}

/// Simulated state of every taxel of every patch.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SkinConfig,
    states: Vec<Vec<TaxelState>>,
    temperature_c: f64,
    time_s: f64,
    rng: ChaCha8Rng,
    active_event: Option<usize>,
}

impl Simulator {
    /// `salt` separates the noise streams of runs sharing one config seed.
    pub fn new(config: SkinConfig, salt: u64) -> Self {
        let states = config
            .patches
            .iter()
            .map(|p| vec![TaxelState::new(&config.material); p.slot_count()])
            .collect();
        let temperature_c = config.material.thermal.reference_temperature_c;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ salt);
        Self {
            config,
            states,
            temperature_c,
            time_s: 0.0,
            rng,
            active_event: None,
        }
    }

    pub fn config(&self) -> &SkinConfig {
        &self.config
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn temperature_c(&self) -> f64 {
        self.temperature_c
    }

    pub fn patch_index(&self, patch_id: u32) -> Result<usize, SimError> {
        self.config
            .patches
            .iter()
            .position(|p| p.id == patch_id)
            .ok_or(SimError::UnknownPatch(patch_id))
    }

    /// Replaces every contact on one patch.
    pub fn set_contacts(&mut self, patch_index: usize, contacts: &[Contact]) {
        let patch = &self.config.patches[patch_index];
        let material = &self.config.material;
        let mut total = PressureMap::zeros(patch.slot_count());
        for c in contacts {
            total.add(&apply_spatial_spread(c, patch, material));
        }
        for (state, p) in self.states[patch_index].iter_mut().zip(&total.kpa) {
            state.load(*p, material);
        }
    }

    pub fn clear_contacts(&mut self) {
        for i in 0..self.states.len() {
            self.set_contacts(i, &[]);
        }
    }

    pub fn set_temperature(&mut self, t_c: f64) {
        self.temperature_c = t_c;
        let thermal = &self.config.material.thermal;
        for (patch, states) in self.config.patches.iter().zip(&mut self.states) {
            for placed in patch.taxels() {
                states[placed.slot].temperature_deltac_ff = thermal_response(placed.descriptor, t_c, thermal);
            }
        }
    }

    /// Advances simulated time; relaxation is closed-form, so any `dt` is exact.
    pub fn advance(&mut self, dt_s: f64) {
        self.time_s += dt_s;
        for states in &mut self.states {
            for s in states.iter_mut() {
                s.advance(dt_s);
            }
        }
    }

    pub fn state(&self, patch_index: usize, slot: usize) -> &TaxelState {
        &self.states[patch_index][slot]
    }

    pub fn deltac(&self, patch_index: usize, slot: usize) -> f64 {
        self.states[patch_index][slot].total_deltac(&self.config.material)
    }

    /// Digitizes one triangle (storage position `tri_pos`); entry `i` is channel `i`.
    pub fn sample_triangle(&mut self, patch_index: usize, tri_pos: usize) -> [u16; CHANNELS_PER_TRIANGLE] {
        let patch = &self.config.patches[patch_index];
        let offset: usize = patch.triangles[..tri_pos].iter().map(|t| t.taxels.len()).sum();
        let mut out = [0u16; CHANNELS_PER_TRIANGLE];
        for (k, t) in patch.triangles[tri_pos].taxels.iter().enumerate() {
            let dc = self.states[patch_index][offset + k].total_deltac(&self.config.material);
            out[t.channel as usize] = sample_counts(dc, &self.config.cdc, &mut self.rng);
        }
        out
    }

    /// Noise-free, unquantized counterpart of [`Self::sample_triangle`].
    pub fn ideal_triangle(&self, patch_index: usize, tri_pos: usize) -> [f64; CHANNELS_PER_TRIANGLE] {
        let patch = &self.config.patches[patch_index];
        let offset: usize = patch.triangles[..tri_pos].iter().map(|t| t.taxels.len()).sum();
        let mut out = [0.0; CHANNELS_PER_TRIANGLE];
        for (k, t) in patch.triangles[tri_pos].taxels.iter().enumerate() {
            let dc = self.states[patch_index][offset + k].total_deltac(&self.config.material);
            out[t.channel as usize] = self.config.cdc.ideal_counts(dc);
        }
        out
    }

    /// Reads a triangle in the requested mode, as floating-point counts.
    pub fn read_triangle(&mut self, patch_index: usize, tri_pos: usize, mode: Acquisition) -> [f64; CHANNELS_PER_TRIANGLE] {
        match mode {
            Acquisition::Ideal => self.ideal_triangle(patch_index, tri_pos),
            Acquisition::Quantized => self.sample_triangle(patch_index, tri_pos).map(f64::from),
        }
    }

    /// Digitizes every triangle of a patch in storage order.
    pub fn sample_patch(&mut self, patch_index: usize) -> Vec<[u16; CHANNELS_PER_TRIANGLE]> {
        (0..self.config.patches[patch_index].triangles.len())
            .map(|t| self.sample_triangle(patch_index, t))
            .collect()
    }

    /// Applies the stimulus state at time `t_s`. Contacts are re-spread only
    /// when the active contact event changes.
    pub fn apply_stimulus(&mut self, stimulus: &Stimulus, t_s: f64) -> Result<(), SimError> {
        if let Some(temp) = stimulus.temperature_at(t_s) {
            if temp != self.temperature_c {
                self.set_temperature(temp);
            }
        }
        let event = stimulus.active_contact_event(t_s);
        if event != self.active_event {
            self.active_event = event;
            let specs = event.and_then(|i| stimulus.events[i].contacts.as_deref()).unwrap_or(&[]);
            let mut per_patch: Vec<Vec<Contact>> = vec![Vec::new(); self.config.patches.len()];
            for spec in specs {
                let pi = self.patch_index(spec.patch)?;
                per_patch[pi].push(spec.resolve(&self.config, pi)?);
            }
            for (pi, contacts) in per_patch.iter().enumerate() {
                self.set_contacts(pi, contacts);
            }
        }
        Ok(())
    }
}

/// A probe contact in a stimulus script; exactly one of pressure or depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSpec {
    #[serde(default)]
    pub patch: u32,
    pub center_mm: Point2,
    pub diameter_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_kpa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_mm: Option<f64>,
}

impl ContactSpec {
    fn resolve(&self, config: &SkinConfig, patch_index: usize) -> Result<Contact, SimError> {
        let pressure_kpa = match (self.pressure_kpa, self.depth_mm) {
            (Some(p), None) => p,
            (None, Some(d)) => config
                .material
                .depth_to_pressure(d, config.patches[patch_index].dielectric_thickness_mm)?,
            _ => {
                return Err(SimError::InvalidStimulus(
                    "contact needs exactly one of pressure_kpa or depth_mm".into(),
                ))
            }
        };
        Ok(Contact {
            center_mm: self.center_mm,
            diameter_mm: self.diameter_mm,
            pressure_kpa,
        })
    }
}

/// One timeline entry. Temperature is interpolated linearly between events
/// that set it; a contact list stays active until the next event setting one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    pub time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contacts: Option<Vec<ContactSpec>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Stimulus {
    #[serde(default)]
    pub events: Vec<StimulusEvent>,
}

impl Stimulus {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| SimError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Checks ordering and resolvability of every event against `config`.
    pub fn validate(&self, config: &SkinConfig) -> Result<(), SimError> {
        let mut last = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.time_s >= last && e.time_s.is_finite()) {
                return Err(SimError::InvalidStimulus(format!(
                    "event {i}: times must be finite, non-negative and non-decreasing"
                )));
            }
            last = e.time_s;
            if let Some(t) = e.temperature_c {
                if !t.is_finite() {
                    return Err(SimError::InvalidStimulus(format!("event {i}: non-finite temperature")));
                }
            }
            for c in e.contacts.iter().flatten() {
                let pi = config
                    .patches
                    .iter()
                    .position(|p| p.id == c.patch)
                    .ok_or(SimError::UnknownPatch(c.patch))?;
                if !(c.diameter_mm > 0.0 && c.diameter_mm.is_finite()) {
                    return Err(SimError::InvalidStimulus(format!("event {i}: probe diameter must be > 0")));
                }
                let contact = c.resolve(config, pi)?;
                if !(contact.pressure_kpa >= 0.0 && contact.pressure_kpa.is_finite()) {
                    return Err(SimError::InvalidStimulus(format!("event {i}: pressure must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Ambient temperature at `t_s`, or `None` when no event sets one.
    pub fn temperature_at(&self, t_s: f64) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for e in &self.events {
            let Some(temp) = e.temperature_c else { continue };
            if e.time_s > t_s {
                return Some(match prev {
                    Some((t0, v0)) if e.time_s > t0 => v0 + (temp - v0) * (t_s - t0) / (e.time_s - t0),
                    Some((_, v0)) => v0,
                    None => temp,
                });
            }
            prev = Some((e.time_s, temp));
        }
        prev.map(|(_, v)| v)
    }

    /// Index of the last event at or before `t_s` that sets contacts.
    pub fn active_contact_event(&self, t_s: f64) -> Option<usize> {
        self.events
            .iter()
            .enumerate()
            .rev()
            .find(|(_, e)| e.contacts.is_some() && e.time_s <= t_s)
            .map(|(i, _)| i)
    }
}

/// True for channels whose taxel responds to pressure.
pub fn is_pressure_channel(config: &SkinConfig, channel: u8) -> bool {
    config
        .patches
        .first()
        .and_then(|p| p.triangles.first())
        .and_then(|t| t.taxel(channel))
        .is_some_and(|t| t.kind == TaxelKind::Pressure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TaxelRef;

    fn quiet_single() -> SkinConfig {
        let mut c = SkinConfig::preset("single-triangle").unwrap();
        c.cdc.noise_std_counts = 0.0;
        c
    }

    #[test]
    fn idle_triangle_reads_baseline() {
        let mut sim = Simulator::new(quiet_single(), 0);
        assert_eq!(sim.sample_triangle(0, 0), [32768; 12]);
    }

    #[test]
    fn pressure_on_one_taxel_moves_only_its_channel() {
        let mut config = quiet_single();
        // A narrow kernel keeps the neighbours below one count.
        config.material.spread_sigma_base_mm = 0.3;
        config.material.spread_sigma_probe_factor = 0.0;
        let mut sim = Simulator::new(config, 0);
        let at = sim.config().patches[0].taxel_world_position(0, 0).unwrap();
        sim.set_contacts(
            0,
            &[Contact {
                center_mm: at,
                diameter_mm: 1.0,
                pressure_kpa: 40.0,
            }],
        );
        let counts = sim.sample_triangle(0, 0);
        assert!(counts[0] > 32768);
        for (ch, c) in counts.iter().enumerate().skip(1) {
            assert_eq!(*c, 32768, "channel {ch}");
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let config = SkinConfig::preset("flat-prototype").unwrap();
        let run = || {
            let mut sim = Simulator::new(config.clone(), 3);
            (0..5).map(|_| sim.sample_patch(0)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn temperature_interpolates_between_events() {
        let s = Stimulus::from_toml_str(
            "[[events]]\ntime_s = 0.0\ntemperature_c = 15.0\n[[events]]\ntime_s = 10.0\ntemperature_c = 40.0\n",
        )
        .unwrap();
        assert_eq!(s.temperature_at(-1.0), Some(15.0));
        assert_eq!(s.temperature_at(4.0), Some(25.0));
        assert_eq!(s.temperature_at(20.0), Some(40.0));
        assert_eq!(Stimulus::default().temperature_at(1.0), None);
    }

    #[test]
    fn contact_events_are_piecewise_constant() {
        let config = quiet_single();
        let centre = config.patches[0].taxel_world_position(0, 5).unwrap();
        let s = Stimulus {
            events: vec![
                StimulusEvent {
                    time_s: 1.0,
                    temperature_c: None,
                    contacts: Some(vec![ContactSpec {
                        patch: 0,
                        center_mm: centre,
                        diameter_mm: 7.0,
                        pressure_kpa: None,
                        depth_mm: Some(0.4),
                    }]),
                },
                StimulusEvent {
                    time_s: 2.0,
                    temperature_c: None,
                    contacts: Some(vec![]),
                },
            ],
        };
        s.validate(&config).unwrap();
        let mut sim = Simulator::new(config, 0);
        let slot = sim.config().patches[0].slot(TaxelRef::new(0, 5)).unwrap();
        sim.apply_stimulus(&s, 0.5).unwrap();
        assert_eq!(sim.state(0, slot).commanded_kpa, 0.0);
        sim.apply_stimulus(&s, 1.5).unwrap();
        assert!((sim.state(0, slot).commanded_kpa - 28.6).abs() < 1e-9);
        sim.apply_stimulus(&s, 2.0).unwrap();
        assert_eq!(sim.state(0, slot).commanded_kpa, 0.0);
        let text = s.to_toml_string();
        assert_eq!(Stimulus::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn bad_stimulus_rejected() {
        let config = quiet_single();
        let s = Stimulus {
            events: vec![StimulusEvent {
                time_s: 0.0,
                temperature_c: None,
                contacts: Some(vec![ContactSpec {
                    patch: 0,
                    center_mm: Point2::new(15.0, 8.0),
                    diameter_mm: 7.0,
                    pressure_kpa: None,
                    depth_mm: Some(2.5),
                }]),
            }],
        };
        assert!(matches!(s.validate(&config), Err(SimError::Physics(_))));
    }
}
