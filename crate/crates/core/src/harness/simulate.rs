//! Free-running simulation driven by a stimulus script, recorded as a binary
//! frame log and its decoded samples.

use super::HarnessError;
use crate::bus::{decode_records, encode_log, mtb_poll, parse_log, write_samples_csv, TaxelSample};
use crate::config::SkinConfig;
use crate::sim::{Simulator, Stimulus};

/// Noise stream of ad-hoc simulations.
const SIMULATE_SALT: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub ticks: u64,
    pub frame_count: usize,
    /// Binary frame log.
    pub log: Vec<u8>,
    /// Samples decoded back from `log`.
    pub samples: Vec<TaxelSample>,
}

impl SimulationOutput {
    pub fn samples_csv(&self) -> Result<String, HarnessError> {
        let mut out = Vec::new();
        write_samples_csv(&mut out, &self.samples)?;
        Ok(String::from_utf8(out).expect("csv output is UTF-8"))
    }
}

/// Runs every patch for `duration_s` of simulated time.
pub fn simulate(config: &SkinConfig, stimulus: &Stimulus, duration_s: f64) -> Result<SimulationOutput, HarnessError> {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(HarnessError::InvalidProtocol(format!("duration {duration_s} s must be finite and >= 0")));
    }
    let ticks = (duration_s * config.sample_rate_hz).round() as u64;
    let sim = Simulator::new(config.clone(), SIMULATE_SALT);
    let mut records = Vec::new();
    for set in mtb_poll(sim, stimulus.clone(), Some(ticks)).map_err(HarnessError::Bus)? {
        let set = set?;
        records.extend(set.frames.into_iter().map(|f| (set.time_ns, f)));
    }
    let log = encode_log(records.iter().map(|(t, f)| (*t, f)));
    let parsed = parse_log(&log).map_err(crate::bus::BusError::from)?;
    let samples = decode_records(&parsed)?;
    Ok(SimulationOutput {
        ticks,
        frame_count: records.len(),
        log,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_flat_patch_has_1600_frames() {
        let config = SkinConfig::preset("flat-prototype").unwrap();
        let out = simulate(&config, &Stimulus::default(), 1.0).unwrap();
        assert_eq!(out.frame_count, 25 * 64);
        assert_eq!(out.samples.len(), 25 * 16 * 12);
    }

    #[test]
    fn zero_duration_gives_empty_log() {
        let config = SkinConfig::preset("single-triangle").unwrap();
        let out = simulate(&config, &Stimulus::default(), 0.0).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.samples_csv().unwrap().lines().count(), 1);
    }
}
