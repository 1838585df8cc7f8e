use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Baseline, PipelineError, Recording};
use crate::topology::{TaxelRef, THERMAL_CHANNELS};

/// Thermal-pad variance, in counts², below which a sweep cannot calibrate.
pub const DEGENERATE_VARIANCE: f64 = 1.0;

/// Gain of one pressure taxel against its triangle's reference pad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub triangle: u32,
    pub channel: u8,
    pub reference_channel: u8,
    pub gain: f64,
    /// RMS of the fit residual, counts.
    pub residual: f64,
}

impl CalibrationEntry {
    pub fn taxel(&self) -> TaxelRef {
        TaxelRef::new(self.triangle, self.channel)
    }

    pub fn reference(&self) -> TaxelRef {
        TaxelRef::new(self.triangle, self.reference_channel)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationTable {
    pub entries: BTreeMap<TaxelRef, CalibrationEntry>,
}

impl CalibrationTable {
    pub fn get(&self, taxel: TaxelRef) -> Option<&CalibrationEntry> {
        self.entries.get(&taxel)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_writer(out);
        for e in self.entries.values() {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, PipelineError> {
        let mut reader = csv::Reader::from_reader(input);
        let mut entries = BTreeMap::new();
        for e in reader.deserialize::<CalibrationEntry>() {
            let e = e?;
            entries.insert(e.taxel(), e);
        }
        Ok(Self { entries })
    }

    /// Copies the gains of triangle `from` onto triangle `to`, channel by channel.
    pub fn retarget(&self, from: u32, to: u32) -> Self {
        let entries = self
            .entries
            .values()
            .filter(|e| e.triangle == from)
            .map(|e| {
                let moved = CalibrationEntry { triangle: to, ..*e };
                (moved.taxel(), moved)
            })
            .collect();
        Self { entries }
    }
}

/// Thermal compensation of one reading: `T_i - K (T_h - mean T_h)`.
pub fn compensate(t_i: f64, t_h: f64, t_h_baseline: f64, gain: f64) -> f64 {
    t_i - gain * (t_h - t_h_baseline)
}

/// Compensates every pressure taxel of `rec`; thermal pads pass through.
pub fn compensate_recording(rec: &Recording, baseline: &Baseline, table: &CalibrationTable) -> Result<Recording, PipelineError> {
    struct Plan {
        col: usize,
        ref_col: usize,
        ref_mean: f64,
        gain: f64,
    }
    let mut plans = Vec::new();
    for (col, taxel) in rec.taxels.iter().enumerate() {
        if THERMAL_CHANNELS.contains(&taxel.channel) {
            continue;
        }
        let e = table.get(*taxel).ok_or(PipelineError::MissingCalibration(*taxel))?;
        let reference = e.reference();
        let ref_col = rec.column(reference).ok_or(PipelineError::MissingCalibration(reference))?;
        let ref_mean = baseline.mean(reference).ok_or(PipelineError::MissingCalibration(reference))?;
        plans.push(Plan {
            col,
            ref_col,
            ref_mean,
            gain: e.gain,
        });
    }
    let rows = rec
        .rows
        .iter()
        .map(|row| {
            let mut out = row.clone();
            for p in &plans {
                out[p.col] = compensate(row[p.col], row[p.ref_col], p.ref_mean, p.gain);
            }
            out
        })
        .collect();
    Ok(Recording {
        taxels: rec.taxels.clone(),
        ticks: rec.ticks.clone(),
        rows,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Least-squares gains of every pressure taxel against a thermal pad, from a
/// no-contact temperature sweep. Per triangle the pad with the lower summed
/// residual becomes the reference; ties go to the lower channel.
pub fn calibrate_gains(rec: &Recording) -> Result<CalibrationTable, PipelineError> {
    if rec.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let mut triangles: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (col, t) in rec.taxels.iter().enumerate() {
        triangles.entry(t.triangle_id).or_default().push(col);
    }
    let centred = |col: usize| {
        let xs: Vec<f64> = rec.series(col).collect();
        let m = mean(&xs);
        xs.into_iter().map(|x| x - m).collect::<Vec<f64>>()
    };
    let mut table = CalibrationTable::default();
    for (triangle_id, cols) in triangles {
        let (pads, taxels): (Vec<usize>, Vec<usize>) =
            cols.into_iter().partition(|&c| THERMAL_CHANNELS.contains(&rec.taxels[c].channel));
        let targets: Vec<(usize, Vec<f64>)> = taxels.iter().map(|&c| (c, centred(c))).collect();
        let mut best: Option<(f64, Vec<CalibrationEntry>)> = None;
        for pad in pads {
            let dh = centred(pad);
            let var = mean(&dh.iter().map(|x| x * x).collect::<Vec<_>>());
            if !(var >= DEGENERATE_VARIANCE) {
                continue;
            }
            let mut total = 0.0;
            let mut entries = Vec::new();
            for (col, di) in &targets {
                let cov = di.iter().zip(&dh).map(|(a, b)| a * b).sum::<f64>() / dh.len() as f64;
                let gain = cov / var;
                let ss = di.iter().zip(&dh).map(|(a, b)| (a - gain * b).powi(2)).sum::<f64>();
                let residual = (ss / dh.len() as f64).sqrt();
                total += residual;
                entries.push(CalibrationEntry {
                    triangle: triangle_id,
                    channel: rec.taxels[*col].channel,
                    reference_channel: rec.taxels[pad].channel,
                    gain,
                    residual,
                });
            }
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, entries));
            }
        }
        let (_, entries) = best.ok_or(PipelineError::DegenerateSweep { triangle_id })?;
        for e in entries {
            table.entries.insert(e.taxel(), e);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::capture_baseline;
    use proptest::prelude::*;

    /// One triangle; pad 6 follows `h`, pad 7 is noisier, taxels follow `gains * h`.
    fn sweep(h: &[f64], gains: [f64; 10]) -> Recording {
        let pressure = [0u8, 1, 2, 3, 4, 5, 8, 9, 10, 11];
        let samples = h.iter().enumerate().flat_map(|(t, &x)| {
            let mut v = vec![
                (t as u64, TaxelRef::new(0, 6), 1000.0 + x),
                (t as u64, TaxelRef::new(0, 7), 1000.0 + x + if t % 2 == 0 { 0.5 } else { -0.5 }),
            ];
            for (k, ch) in pressure.iter().enumerate() {
                v.push((t as u64, TaxelRef::new(0, *ch), 30000.0 + gains[k] * x));
            }
            v
        });
        Recording::from_samples(samples).unwrap()
    }

    #[test]
    fn hand_evaluated_compensation() {
        assert_eq!(compensate(1000.0, 1100.0, 1000.0, 0.5), 950.0);
        assert_eq!(compensate(1000.0, 1234.0, 1000.0, 0.0), 1000.0);
        assert_eq!(compensate(1000.0, 1234.0, 1234.0, 0.7), 1000.0);
    }

    #[test]
    fn exact_proportional_sweep() {
        let h: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let rec = sweep(&h, [0.8; 10]);
        let table = calibrate_gains(&rec).unwrap();
        assert_eq!(table.entries.len(), 10);
        for e in table.entries.values() {
            assert_eq!(e.reference_channel, 6);
            assert!((e.gain - 0.8).abs() < 1e-12);
            assert!(e.residual < 1e-9);
        }
        let baseline = capture_baseline(&rec, 1).unwrap();
        let comp = compensate_recording(&rec, &baseline, &table).unwrap();
        let col = comp.column(TaxelRef::new(0, 3)).unwrap();
        for v in comp.series(col) {
            assert!((v - 30000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_temperature_is_degenerate() {
        let rec = sweep(&[0.0; 100], [0.8; 10]);
        assert!(matches!(calibrate_gains(&rec), Err(PipelineError::DegenerateSweep { triangle_id: 0 })));
    }

    #[test]
    fn table_csv_round_trip() {
        let h: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let table = calibrate_gains(&sweep(&h, [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2])).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("triangle,channel,reference_channel,gain,residual"));
        assert_eq!(CalibrationTable::read_csv(buf.as_slice()).unwrap(), table);
        let moved = table.retarget(0, 5);
        assert_eq!(moved.get(TaxelRef::new(5, 11)).unwrap().gain, table.get(TaxelRef::new(0, 11)).unwrap().gain);
    }

    #[test]
    fn missing_calibration() {
        let h: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let rec = sweep(&h, [1.0; 10]);
        let baseline = capture_baseline(&rec, 1).unwrap();
        let r = compensate_recording(&rec, &baseline, &CalibrationTable::default());
        assert!(matches!(r, Err(PipelineError::MissingCalibration(_))));
    }

    proptest! {
        #[test]
        fn affine_in_pad_reading(t_i in -1e5..1e5f64, t_h in -1e5..1e5f64, base in -1e5..1e5f64, k in -5.0..5.0f64, d in -100.0..100.0f64) {
            let a = compensate(t_i, t_h, base, k);
            let b = compensate(t_i, t_h + d, base, k);
            prop_assert!((b - a + k * d).abs() < 1e-6);
            prop_assert_eq!(compensate(t_i, base, base, k), t_i);
        }
    }
}
