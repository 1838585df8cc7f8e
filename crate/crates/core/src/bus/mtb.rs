use std::collections::BTreeMap;

use super::can::{decode_frames, encode_frames, Addressing, CanFrame, FRAMES_PER_TRIANGLE, TICK_MODULUS};
use super::log::LogRecord;
use super::BusError;
use crate::sim::{Simulator, Stimulus};
use crate::topology::{Patch, CHANNELS_PER_TRIANGLE};

/// One digitized reading as delivered on the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxelSample {
    pub time_ns: u64,
    pub board_id: u8,
    pub triangle_index: u8,
    pub channel: u8,
    pub counts: u16,
    pub tick: u64,
}

/// Every frame one MTB board emits for one tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    pub board_id: u8,
    pub tick: u64,
    pub time_ns: u64,
    /// Ordered by triangle index, then frame index.
    pub frames: Vec<CanFrame>,
}

/// Digitizes a triangle and returns its twelve channel counts.
pub fn cdc_sample_triangle(sim: &mut Simulator, patch_index: usize, triangle_id: u32) -> Result<[u16; CHANNELS_PER_TRIANGLE], BusError> {
    let patch = &sim.config().patches[patch_index];
    let pos = patch
        .triangles
        .iter()
        .position(|t| t.id == triangle_id)
        .ok_or(BusError::UnknownTriangle(triangle_id))?;
    Ok(sim.sample_triangle(patch_index, pos))
}

/// Encodes a patch's samples (triangle storage order) for one tick.
pub fn encode_patch(
    patch: &Patch,
    samples: &[[u16; CHANNELS_PER_TRIANGLE]],
    tick: u64,
    time_ns: u64,
) -> Result<FrameSet, BusError> {
    let mut by_index = Vec::with_capacity(patch.triangles.len());
    for (tri, s) in patch.triangles.iter().zip(samples) {
        by_index.push((Addressing::from_i2c(patch.id, tri.i2c_bus, tri.i2c_addr)?, s));
    }
    by_index.sort_by_key(|(a, _)| a.triangle_index);
    let mut frames = Vec::with_capacity(by_index.len() * FRAMES_PER_TRIANGLE);
    for (addr, s) in by_index {
        frames.extend(encode_frames(s, addr, tick)?);
    }
    Ok(FrameSet {
        board_id: patch.id as u8,
        tick,
        time_ns,
        frames,
    })
}

/// Simulated time of tick `n`, in whole nanoseconds.
pub fn tick_time_ns(tick: u64, sample_rate_hz: f64) -> u64 {
    (tick as f64 * 1e9 / sample_rate_hz).round() as u64
}

/// Pull-based stream of frame sets, one per patch per tick, in simulated time.
pub struct MtbPoller {
    sim: Simulator,
    stimulus: Stimulus,
    tick: u64,
    end_tick: Option<u64>,
    pending: std::collections::VecDeque<FrameSet>,
}

/// Starts polling every patch of `sim` while driving it with `stimulus`.
/// `ticks = None` streams forever.
pub fn mtb_poll(sim: Simulator, stimulus: Stimulus, ticks: Option<u64>) -> Result<MtbPoller, BusError> {
    stimulus.validate(sim.config())?;
    Ok(MtbPoller {
        sim,
        stimulus,
        tick: 0,
        end_tick: ticks,
        pending: Default::default(),
    })
}

impl MtbPoller {
    fn step(&mut self) -> Result<(), BusError> {
        let rate = self.sim.config().sample_rate_hz;
        let t = self.tick as f64 / rate;
        self.sim.apply_stimulus(&self.stimulus, t)?;
        let time_ns = tick_time_ns(self.tick, rate);
        for pi in 0..self.sim.config().patches.len() {
            let samples = self.sim.sample_patch(pi);
            let set = encode_patch(&self.sim.config().patches[pi], &samples, self.tick, time_ns)?;
            self.pending.push_back(set);
        }
        self.tick += 1;
        let next = self.tick as f64 / rate;
        self.sim.advance(next - t);
        Ok(())
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }
}

impl Iterator for MtbPoller {
    type Item = Result<FrameSet, BusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pending.is_empty() {
            if self.end_tick.is_some_and(|end| self.tick >= end) {
                return None;
            }
            if let Err(e) = self.step() {
                self.end_tick = Some(self.tick);
                return Some(Err(e));
            }
        }
        self.pending.pop_front().map(Ok)
    }
}

/// Reassembles triangle readings from a parsed log. Consecutive groups of four
/// records form one triangle; tick tags are unwrapped per triangle into
/// monotone tick numbers.
pub fn decode_records(records: &[LogRecord]) -> Result<Vec<TaxelSample>, BusError> {
    let mut out = Vec::with_capacity(records.len() * 3);
    let mut ticks: BTreeMap<Addressing, u64> = BTreeMap::new();
    for group in records.chunks(FRAMES_PER_TRIANGLE) {
        let frames: Vec<CanFrame> = group.iter().map(|r| r.frame).collect();
        let decoded = decode_frames(&frames).map_err(|source| BusError::Frame {
            offset: group[0].offset,
            source,
        })?;
        let tag = decoded.tick_tag as u64;
        let tick = match ticks.get(&decoded.addressing) {
            None => tag,
            Some(&last) => last + (tag + TICK_MODULUS - last % TICK_MODULUS) % TICK_MODULUS,
        };
        ticks.insert(decoded.addressing, tick);
        for (ch, counts) in decoded.samples.iter().enumerate() {
            out.push(TaxelSample {
                time_ns: group[0].time_ns,
                board_id: decoded.addressing.board_id,
                triangle_index: decoded.addressing.triangle_index,
                channel: ch as u8,
                counts: *counts,
                tick,
            });
        }
    }
    Ok(out)
}

pub const SAMPLE_CSV_HEADER: [&str; 6] = ["time_ns", "board", "triangle", "tick", "channel", "counts"];

pub fn write_samples_csv<W: std::io::Write>(out: W, samples: &[TaxelSample]) -> Result<(), BusError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLE_CSV_HEADER)?;
    for s in samples {
        w.write_record([
            s.time_ns.to_string(),
            s.board_id.to_string(),
            s.triangle_index.to_string(),
            s.tick.to_string(),
            s.channel.to_string(),
            s.counts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
