use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use super::PipelineError;
use crate::topology::TaxelRef;

/// Dense per-tick table of counts, one column per taxel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recording {
    /// Column keys, sorted.
    pub taxels: Vec<TaxelRef>,
    pub ticks: Vec<u64>,
    /// `rows[i][j]` is taxel `taxels[j]` at tick `ticks[i]`.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    board: u8,
    triangle: u32,
    tick: u64,
    channel: u8,
    counts: f64,
}

impl Recording {
    /// Builds a recording from `(tick, taxel, counts)` triples. Every tick must
    /// carry the same set of taxels.
    pub fn from_samples(samples: impl IntoIterator<Item = (u64, TaxelRef, f64)>) -> Result<Self, PipelineError> {
        let mut by_tick: BTreeMap<u64, BTreeMap<TaxelRef, f64>> = BTreeMap::new();
        for (tick, taxel, v) in samples {
            by_tick.entry(tick).or_default().insert(taxel, v);
        }
        let Some(first) = by_tick.values().next() else {
            return Ok(Self::default());
        };
        let taxels: Vec<TaxelRef> = first.keys().copied().collect();
        let mut rec = Self {
            taxels,
            ..Self::default()
        };
        for (tick, row) in by_tick {
            if row.len() != rec.taxels.len() || !row.keys().zip(&rec.taxels).all(|(a, b)| a == b) {
                return Err(PipelineError::Malformed(format!("tick {tick} covers a different taxel set")));
            }
            rec.ticks.push(tick);
            rec.rows.push(row.into_values().collect());
        }
        Ok(rec)
    }

    /// Reads the bus sample CSV (`time_ns, board, triangle, tick, channel,
    /// counts`, extra columns ignored), keeping only `board`.
    pub fn read_sample_csv<R: Read>(input: R, board: u8) -> Result<Self, PipelineError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut samples = Vec::new();
        for row in reader.deserialize::<SampleRow>() {
            let row = row?;
            if row.board == board {
                samples.push((row.tick, TaxelRef::new(row.triangle, row.channel), row.counts));
            }
        }
        Self::from_samples(samples)
    }

    pub fn write_sample_csv<W: Write>(&self, out: W, board: u8, sample_rate_hz: f64) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(crate::bus::mtb::SAMPLE_CSV_HEADER)?;
        for (tick, row) in self.ticks.iter().zip(&self.rows) {
            let time_ns = crate::bus::tick_time_ns(*tick, sample_rate_hz).to_string();
            for (taxel, v) in self.taxels.iter().zip(row) {
                w.write_record([
                    time_ns.clone(),
                    board.to_string(),
                    taxel.triangle_id.to_string(),
                    tick.to_string(),
                    taxel.channel.to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, taxel: TaxelRef) -> Option<usize> {
        self.taxels.binary_search(&taxel).ok()
    }

    pub fn series(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[col])
    }

    /// Renames every triangle through `map`, which must know all of them.
    pub fn relabel_triangles(&self, map: impl Fn(u32) -> Option<u32>) -> Result<Recording, PipelineError> {
        let mut samples = Vec::with_capacity(self.len() * self.taxels.len());
        for (tick, row) in self.ticks.iter().zip(&self.rows) {
            for (t, v) in self.taxels.iter().zip(row) {
                let id = map(t.triangle_id)
                    .ok_or_else(|| PipelineError::Malformed(format!("unknown triangle {}", t.triangle_id)))?;
                samples.push((*tick, TaxelRef::new(id, t.channel), *v));
            }
        }
        Self::from_samples(samples)
    }

    /// Rows from index `start` on.
    pub fn tail(&self, start: usize) -> Recording {
        let start = start.min(self.len());
        Recording {
            taxels: self.taxels.clone(),
            ticks: self.ticks[start..].to_vec(),
            rows: self.rows[start..].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let samples = (0..3u64).flat_map(|t| (0..12u8).map(move |c| (t, TaxelRef::new(0, c), 32768.0 + (t * c as u64) as f64)));
        let rec = Recording::from_samples(samples).unwrap();
        assert_eq!(rec.len(), 3);
        let mut buf = Vec::new();
        rec.write_sample_csv(&mut buf, 0, 25.0).unwrap();
        let back = Recording::read_sample_csv(buf.as_slice(), 0).unwrap();
        assert_eq!(back, rec);
        assert!(Recording::read_sample_csv(buf.as_slice(), 1).unwrap().is_empty());
    }

    #[test]
    fn ragged_ticks_rejected() {
        let samples = vec![
            (0, TaxelRef::new(0, 0), 1.0),
            (0, TaxelRef::new(0, 1), 1.0),
            (1, TaxelRef::new(0, 0), 1.0),
        ];
        assert!(Recording::from_samples(samples).is_err());
    }
}
