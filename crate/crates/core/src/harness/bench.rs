use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_target, HarnessError, HarnessOptions};
use crate::config::SkinConfig;
use crate::physics::{Contact, Relaxation};
use crate::sim::{Acquisition, Simulator};
use crate::topology::{Point2, TaxelRef, CHANNELS_PER_TRIANGLE};

/// One stop of the probe. Depth 0 means retracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x_mm: f64,
    pub y_mm: f64,
    pub depth_mm: f64,
    pub dwell_s: f64,
}

/// Ordered probe stops for one cycle, repeated with a wait in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrajectory {
    pub waypoints: Vec<Waypoint>,
    pub probe_diameter_mm: f64,
    pub inter_cycle_wait_s: f64,
}

impl ProbeTrajectory {
    pub fn validate(&self, thickness_mm: f64) -> Result<(), HarnessError> {
        if !(self.probe_diameter_mm > 0.0) {
            return Err(HarnessError::InvalidProtocol("probe diameter must be > 0".into()));
        }
        if !(self.inter_cycle_wait_s >= 0.0) {
            return Err(HarnessError::InvalidProtocol("inter-cycle wait must be >= 0".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w.depth_mm >= 0.0 && w.depth_mm < thickness_mm) {
                return Err(HarnessError::InvalidProtocol(format!(
                    "waypoint {i}: depth {} mm outside [0, {thickness_mm})",
                    w.depth_mm
                )));
            }
            if !(w.dwell_s >= 0.0) {
                return Err(HarnessError::InvalidProtocol(format!("waypoint {i}: negative dwell")));
            }
        }
        Ok(())
    }
}

/// Force sensor behind the probe. Its contact stress relaxes like the
/// dielectric it compresses.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualLoadCell {
    pub noise_std_n: f64,
    pub area_mm2: f64,
    commanded_kpa: f64,
    stress: Relaxation,
}

impl VirtualLoadCell {
    pub fn new(area_mm2: f64, tau_s: f64, noise_std_n: f64) -> Self {
        Self {
            noise_std_n,
            area_mm2,
            commanded_kpa: 0.0,
            stress: Relaxation::new(0.0, tau_s),
        }
    }

    fn load(&mut self, p_kpa: f64) {
        if p_kpa == self.commanded_kpa {
            return;
        }
        let next = if p_kpa == 0.0 {
            0.0
        } else {
            self.stress.value() + (p_kpa - self.commanded_kpa)
        };
        self.stress.restart(next);
        self.commanded_kpa = p_kpa;
    }

    fn advance(&mut self, dt_s: f64) {
        self.stress = crate::physics::step_relaxation(self.stress, dt_s);
    }

    /// Noise-free force, newtons.
    pub fn true_force_n(&self) -> f64 {
        self.stress.value() * self.area_mm2 * 1e-3
    }
}

/// One tick of readings from the bench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickReading {
    pub tick: u64,
    pub time_s: f64,
    pub load_cell_n: f64,
    /// Target triangle, indexed by channel.
    pub counts: [f64; CHANNELS_PER_TRIANGLE],
}

/// Cartesian probe, load cell and skin under test.
pub struct Bench {
    pub sim: Simulator,
    pub patch_index: usize,
    /// Storage position of the target triangle in its patch.
    pub triangle_pos: usize,
    pub target: TaxelRef,
    pub mode: Acquisition,
    pub load_cell: VirtualLoadCell,
    rng: ChaCha8Rng,
    tick: u64,
    position: Option<(Point2, f64)>,
}

impl Bench {
    pub fn new(
        mut config: SkinConfig,
        patch_id: u32,
        target: TaxelRef,
        probe_diameter_mm: f64,
        options: HarnessOptions,
        salt: u64,
    ) -> Result<Self, HarnessError> {
        check_target(&config, patch_id, target)?;
        if options.noise_free {
            config.cdc.noise_std_counts = 0.0;
        }
        let mode = if options.noise_free {
            Acquisition::Ideal
        } else {
            Acquisition::Quantized
        };
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ salt ^ 0x10ad_ce11);
        let tau = config.material.relaxation_tau_s;
        let sim = Simulator::new(config, salt);
        let patch_index = sim.patch_index(patch_id)?;
        let triangle_pos = sim.config().patches[patch_index]
            .triangles
            .iter()
            .position(|t| t.id == target.triangle_id)
            .ok_or_else(|| HarnessError::InvalidTarget(format!("no triangle {}", target.triangle_id)))?;
        let area = std::f64::consts::PI * (probe_diameter_mm / 2.0).powi(2);
        Ok(Self {
            sim,
            patch_index,
            triangle_pos,
            target,
            mode,
            load_cell: VirtualLoadCell::new(area, tau, 0.0),
            rng,
            tick: 0,
            position: None,
        })
    }

    pub fn config(&self) -> &SkinConfig {
        self.sim.config()
    }

    pub fn thickness_mm(&self) -> f64 {
        self.config().patches[self.patch_index].dielectric_thickness_mm
    }

    pub fn target_position(&self) -> Point2 {
        self.config().patches[self.patch_index]
            .taxel_world_position(self.target.triangle_id, self.target.channel)
            .expect("target checked at construction")
    }

    /// Deepest multiple of `step_mm` whose force stays within `force_limit_n`.
    pub fn max_steps(&self, step_mm: f64, force_limit_n: f64) -> Result<usize, HarnessError> {
        let mut n = 0;
        loop {
            let depth = (n + 1) as f64 * step_mm;
            if depth >= self.thickness_mm() {
                return Ok(n);
            }
            let p = self.config().material.depth_to_pressure(depth, self.thickness_mm())?;
            if p * self.load_cell.area_mm2 * 1e-3 > force_limit_n + 1e-12 {
                return Ok(n);
            }
            n += 1;
        }
    }

    /// Moves the probe to `at` and indents to `depth_mm`; depth 0 lifts it.
    pub fn press(&mut self, at: Point2, diameter_mm: f64, depth_mm: f64) -> Result<f64, HarnessError> {
        let p = self.config().material.depth_to_pressure(depth_mm, self.thickness_mm())?;
        if self.position == Some((at, p)) {
            return Ok(p);
        }
        let contacts = if p > 0.0 {
            vec![Contact {
                center_mm: at,
                diameter_mm,
                pressure_kpa: p,
            }]
        } else {
            Vec::new()
        };
        self.sim.set_contacts(self.patch_index, &contacts);
        self.load_cell.load(p);
        self.position = Some((at, p));
        Ok(p)
    }

    pub fn release(&mut self) {
        self.sim.set_contacts(self.patch_index, &[]);
        self.load_cell.load(0.0);
        self.position = None;
    }

    pub fn set_temperature(&mut self, t_c: f64) {
        self.sim.set_temperature(t_c);
    }

    fn load_cell_reading(&mut self) -> f64 {
        let f = self.load_cell.true_force_n();
        let noise = if self.load_cell.noise_std_n > 0.0 {
            Normal::new(0.0, self.load_cell.noise_std_n).map_or(0.0, |n| n.sample(&mut self.rng))
        } else {
            0.0
        };
        (f + noise).max(0.0)
    }

    fn step_time(&mut self) {
        let rate = self.config().sample_rate_hz;
        let t0 = self.tick as f64 / rate;
        self.tick += 1;
        let dt = self.tick as f64 / rate - t0;
        self.sim.advance(dt);
        self.load_cell.advance(dt);
    }

    /// Samples the target triangle, then advances one sample period.
    pub fn tick(&mut self) -> TickReading {
        let reading = TickReading {
            tick: self.tick,
            time_s: self.sim.time_s(),
            load_cell_n: self.load_cell_reading(),
            counts: self.sim.read_triangle(self.patch_index, self.triangle_pos, self.mode),
        };
        self.step_time();
        reading
    }

    /// Samples every triangle of the patch (storage order), then advances.
    pub fn tick_patch(&mut self) -> (u64, Vec<[f64; CHANNELS_PER_TRIANGLE]>) {
        let n = self.config().patches[self.patch_index].triangles.len();
        let tick = self.tick;
        let frames = (0..n)
            .map(|t| self.sim.read_triangle(self.patch_index, t, self.mode))
            .collect();
        self.step_time();
        (tick, frames)
    }

    /// Idles for `seconds` without sampling; state advances in closed form.
    /// The tick counter moves on so later timestamps stay on the sample grid.
    pub fn wait(&mut self, seconds: f64) {
        let rate = self.config().sample_rate_hz;
        let ticks = (seconds * rate).round() as u64;
        let t0 = self.tick as f64 / rate;
        self.tick += ticks;
        let dt = self.tick as f64 / rate - t0;
        self.sim.advance(dt);
        self.load_cell.advance(dt);
    }

    pub fn ticks_for(&self, seconds: f64) -> usize {
        (seconds * self.config().sample_rate_hz).round() as usize
    }

    /// Mean of each target-triangle channel over `ticks` idle samples.
    pub fn capture_baseline(&mut self, ticks: usize) -> [f64; CHANNELS_PER_TRIANGLE] {
        let mut acc = [0.0; CHANNELS_PER_TRIANGLE];
        let n = ticks.max(1);
        for _ in 0..n {
            let r = self.tick();
            for (a, c) in acc.iter_mut().zip(r.counts) {
                *a += c;
            }
        }
        acc.map(|a| a / n as f64)
    }

    /// Runs one pass of `trajectory`, calling `record(waypoint index, reading)`
    /// for every tick.
    pub fn run_cycle(
        &mut self,
        trajectory: &ProbeTrajectory,
        mut record: impl FnMut(usize, &TickReading),
    ) -> Result<(), HarnessError> {
        trajectory.validate(self.thickness_mm())?;
        for (i, w) in trajectory.waypoints.iter().enumerate() {
            if w.depth_mm > 0.0 {
                self.press(Point2::new(w.x_mm, w.y_mm), trajectory.probe_diameter_mm, w.depth_mm)?;
            } else {
                self.release();
            }
            for _ in 0..self.ticks_for(w.dwell_s) {
                let r = self.tick();
                record(i, &r);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench(noise_free: bool) -> Bench {
        let config = SkinConfig::preset("single-triangle").unwrap();
        Bench::new(config, 0, TaxelRef::new(0, 5), 7.0, HarnessOptions { noise_free }, 1).unwrap()
    }

    #[test]
    fn force_limit_caps_steps() {
        let b = bench(true);
        // 0.2 mm steps of 14.3 kPa on a 38.48 mm^2 probe: 8 steps stay under 4.9 N.
        assert_eq!(b.max_steps(0.2, 4.9).unwrap(), 8);
    }

    #[test]
    fn load_cell_relaxes_and_resets() {
        let mut b = bench(true);
        let at = b.target_position();
        b.press(at, 7.0, 0.4).unwrap();
        let f0 = b.tick().load_cell_n;
        let f1 = b.tick().load_cell_n;
        assert!(f1 < f0);
        assert!((f0 - 28.6 * b.load_cell.area_mm2 * 1e-3).abs() < 1e-12);
        b.release();
        assert_eq!(b.tick().load_cell_n, 0.0);
    }

    #[test]
    fn ideal_target_tracks_load_cell_on_static_curve() {
        let mut b = bench(true);
        let base = b.capture_baseline(10);
        let at = b.target_position();
        b.press(at, 7.0, 0.6).unwrap();
        b.wait(300.0);
        let r = b.tick();
        let p = r.load_cell_n / (b.load_cell.area_mm2 * 1e-3);
        let dc = (r.counts[5] - base[5]) * b.config().cdc.lsb_size_ff;
        let expected = b.config().material.pressure_to_deltac(p).unwrap();
        assert!((dc - expected).abs() < 1e-9, "{dc} vs {expected}");
    }

    #[test]
    fn trajectory_rejects_deep_waypoint() {
        let t = ProbeTrajectory {
            waypoints: vec![Waypoint {
                x_mm: 0.0,
                y_mm: 0.0,
                depth_mm: 2.0,
                dwell_s: 1.0,
            }],
            probe_diameter_mm: 7.0,
            inter_cycle_wait_s: 0.0,
        };
        assert!(t.validate(2.0).is_err());
    }
}
