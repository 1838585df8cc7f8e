use std::collections::VecDeque;

use serde::Serialize;

use super::estimate_pressure;
use crate::physics::{CdcParams, MaterialModel};
use crate::topology::{Patch, Point2, TaxelRef, TAXEL_PITCH_MM};

/// Thresholds for turning a compensated frame into contact regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Minimum deviation from baseline, counts.
    pub threshold_counts: f64,
    /// Responding taxels closer than this belong to one region.
    pub adjacency_radius_mm: f64,
}

impl DetectionParams {
    /// Three delivered-noise deviations and one and a half taxel pitches.
    pub fn for_cdc(cdc: &CdcParams) -> Self {
        Self {
            threshold_counts: 3.0 * cdc.effective_noise_std(),
            adjacency_radius_mm: 1.5 * TAXEL_PITCH_MM,
        }
    }
}

/// Spatially connected set of responding taxels with their deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRegion {
    pub members: Vec<(TaxelRef, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactEstimate {
    pub patch_id: u32,
    pub centroid_mm: Point2,
    pub peak_pressure_kpa: f64,
    pub support: Vec<TaxelRef>,
    pub total_deltac_ff: f64,
}

/// Groups taxels whose deviation (compensated minus baseline, counts)
/// exceeds the threshold into regions linked by the adjacency radius.
/// Regions are ordered by their lowest taxel reference.
pub fn detect_contacts(patch: &Patch, deviations: &[(TaxelRef, f64)], params: &DetectionParams) -> Vec<ActivationRegion> {
    let mut active: Vec<(TaxelRef, f64, Point2)> = deviations
        .iter()
        .filter(|(_, d)| *d > params.threshold_counts)
        .filter_map(|(t, d)| Some((*t, *d, patch.taxel_world_position(t.triangle_id, t.channel).ok()?)))
        .collect();
    active.sort_by_key(|a| a.0);
    let mut seen = vec![false; active.len()];
    let mut regions = Vec::new();
    for start in 0..active.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push((active[i].0, active[i].1));
            for j in 0..active.len() {
                if !seen[j] && active[i].2.distance(active[j].2) < params.adjacency_radius_mm {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        members.sort_by_key(|a| a.0);
        regions.push(ActivationRegion { members });
    }
    regions
}

/// Response-weighted centroid of a region and the pressure implied by its
/// strongest taxel. Returns `None` for an empty region.
pub fn localize_contact(
    region: &ActivationRegion,
    patch: &Patch,
    material: &MaterialModel,
    cdc: &CdcParams,
) -> Option<ContactEstimate> {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    let mut peak: Option<f64> = None;
    for (t, w) in &region.members {
        let p = patch.taxel_world_position(t.triangle_id, t.channel).ok()?;
        sx += w * p.x;
        sy += w * p.y;
        sw += w;
        peak = Some(peak.map_or(*w, |m: f64| m.max(*w)));
    }
    if sw <= 0.0 {
        return None;
    }
    let peak_deltac = peak? * cdc.lsb_size_ff;
    let saturated = peak_deltac.clamp(0.0, material.full_scale_deltac());
    Some(ContactEstimate {
        patch_id: patch.id,
        centroid_mm: Point2::new(sx / sw, sy / sw),
        peak_pressure_kpa: estimate_pressure(saturated, material).ok()?,
        support: region.members.iter().map(|(t, _)| *t).collect(),
        total_deltac_ff: sw * cdc.lsb_size_ff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_patch, flat_prototype_layout, single_triangle_layout};

    fn params() -> DetectionParams {
        DetectionParams::for_cdc(&CdcParams::default())
    }

    #[test]
    fn idle_frame_has_no_regions() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let frame: Vec<_> = (0..12).map(|c| (TaxelRef::new(0, c), 0.4)).collect();
        assert!(detect_contacts(&patch, &frame, &params()).is_empty());
    }

    #[test]
    fn single_taxel_region_localizes_on_it() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let mut frame: Vec<_> = (0..12).map(|c| (TaxelRef::new(0, c), 0.0)).collect();
        frame[3].1 = 40.0;
        let regions = detect_contacts(&patch, &frame, &params());
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].members, vec![(TaxelRef::new(0, 3), 40.0)]);
        let est = localize_contact(&regions[0], &patch, &Default::default(), &CdcParams::default()).unwrap();
        assert_eq!(est.centroid_mm, patch.taxel_world_position(0, 3).unwrap());
        assert!((est.peak_pressure_kpa - 40.0 * 0.89 / 2.5).abs() < 1e-9);
    }

    #[test]
    fn equal_pair_gives_midpoint() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let frame = vec![(TaxelRef::new(0, 0), 10.0), (TaxelRef::new(0, 1), 10.0)];
        let regions = detect_contacts(&patch, &frame, &params());
        assert_eq!(regions.len(), 1);
        let est = localize_contact(&regions[0], &patch, &Default::default(), &CdcParams::default()).unwrap();
        let a = patch.taxel_world_position(0, 0).unwrap();
        let b = patch.taxel_world_position(0, 1).unwrap();
        assert!((est.centroid_mm.x - (a.x + b.x) / 2.0).abs() < 1e-12);
        assert!((est.centroid_mm.y - (a.y + b.y) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn distant_taxels_form_two_regions() {
        let patch = build_patch(&flat_prototype_layout()).unwrap();
        let frame = vec![(TaxelRef::new(0, 5), 20.0), (TaxelRef::new(6, 5), 20.0)];
        assert_eq!(detect_contacts(&patch, &frame, &params()).len(), 2);
    }
}
