use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::material::MaterialModel;
use crate::topology::{Patch, Point2, TaxelKind};

/// A flat circular probe pressing on the patch surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub center_mm: Point2,
    pub diameter_mm: f64,
    pub pressure_kpa: f64,
}

impl Contact {
    pub fn area_mm2(&self) -> f64 {
        PI * (self.diameter_mm / 2.0).powi(2)
    }

    /// Normal force in newtons.
    pub fn force_n(&self) -> f64 {
        self.pressure_kpa * self.area_mm2() * 1e-3
    }
}

/// Pressure seen by every taxel of a patch, indexed by slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PressureMap {
    pub kpa: Vec<f64>,
}

impl PressureMap {
    pub fn zeros(slots: usize) -> Self {
        Self { kpa: vec![0.0; slots] }
    }

    pub fn add(&mut self, other: &PressureMap) {
        for (a, b) in self.kpa.iter_mut().zip(&other.kpa) {
            *a += b;
        }
    }

    pub fn argmax(&self) -> Option<usize> {
        self.kpa
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
    }
}

/// Kernel contributions beyond this many widths from a pad edge are dropped.
const CUTOFF_SIGMAS: f64 = 8.0;
const RADIAL_NODES: usize = 24;

/// Distributes the contact force over the patch with an isotropic Gaussian of
/// unit mass, so `sum(p_i * A_i)` equals the force landing on the pads.
pub fn apply_spatial_spread(contact: &Contact, patch: &Patch, material: &MaterialModel) -> PressureMap {
    let sigma = material.spread_sigma(contact.diameter_mm);
    let force = contact.pressure_kpa * contact.area_mm2();
    let mut map = PressureMap::zeros(patch.slot_count());
    if force == 0.0 {
        return map;
    }
    for placed in patch.taxels() {
        if placed.descriptor.kind != TaxelKind::Pressure {
            continue;
        }
        let d = placed.position.distance(contact.center_mm);
        let r = placed.descriptor.pad_radius_mm();
        map.kpa[placed.slot] = force * disc_kernel_mass(d, r, sigma) / placed.descriptor.area_mm2;
    }
    map
}

/// Mass of a unit 2D Gaussian of width `sigma` over a disc of radius `r`
/// whose centre lies `d` away from the Gaussian's centre.
pub fn disc_kernel_mass(d: f64, r: f64, sigma: f64) -> f64 {
    if d - r > CUTOFF_SIGMAS * sigma {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre();
    let s2 = sigma * sigma;
    // Trapezoid in angle is spectrally accurate for the periodic integrand;
    // the node count follows the integrand's angular bandwidth.
    let bandwidth = d * r / s2;
    let n_theta = (bandwidth.ceil() as usize + 24).min(4096);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let rho = 0.5 * r * (x + 1.0);
        let mut ring = 0.0;
        for k in 0..=n_theta {
            let theta = PI * k as f64 / n_theta as f64;
            let dist2 = d * d + rho * rho - 2.0 * d * rho * theta.cos();
            let f = (-dist2 / (2.0 * s2)).exp();
            ring += if k == 0 || k == n_theta { 0.5 * f } else { f };
        }
        // Integral over the full circle by symmetry about the centre line.
        ring *= 2.0 * PI / n_theta as f64;
        total += w * 0.5 * r * rho * ring;
    }
    total / (2.0 * PI * s2)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = RADIAL_NODES;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_patch, flat_prototype_layout, single_triangle_layout, TaxelRef};

    /// Midpoint-rule mass of the kernel over a disc on a fine square grid.
    fn grid_disc_mass(d: f64, r: f64, sigma: f64) -> f64 {
        let h = 0.01;
        let n = (r / h).ceil() as i64;
        let mut acc = 0.0;
        for i in -n..n {
            for j in -n..n {
                let x = (i as f64 + 0.5) * h;
                let y = (j as f64 + 0.5) * h;
                if x * x + y * y <= r * r {
                    let dx = x + d;
                    acc += (-(dx * dx + y * y) / (2.0 * sigma * sigma)).exp();
                }
            }
        }
        acc * h * h / (2.0 * PI * sigma * sigma)
    }

    #[test]
    fn quadrature_weights_sum_to_two() {
        let (nodes, weights) = gauss_legendre();
        assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        // Exact for x^4 on [-1, 1].
        let m4: f64 = nodes.iter().zip(weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-13);
    }

    #[test]
    fn centred_disc_closed_form() {
        let (r, s) = (2.2f64, 1.7f64);
        let exact = 1.0 - (-r * r / (2.0 * s * s)).exp();
        assert!((disc_kernel_mass(0.0, r, s) - exact).abs() < 1e-12);
    }

    #[test]
    fn matches_fine_grid() {
        for &(d, s) in &[(0.0, 2.0), (3.0, 2.0), (5.5, 1.2), (9.0, 2.5), (4.0, 0.6)] {
            let q = disc_kernel_mass(d, 2.2, s);
            let g = grid_disc_mass(d, 2.2, s);
            assert!((q - g).abs() < 2e-3 * g.max(1e-6) + 1e-7, "d={d} s={s}: {q} vs {g}");
        }
    }

    #[test]
    fn peak_at_centred_taxel() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let m = MaterialModel::default();
        for placed in patch.taxels().filter(|t| t.descriptor.kind == TaxelKind::Pressure) {
            let c = Contact {
                center_mm: placed.position,
                diameter_mm: 2.0,
                pressure_kpa: 50.0,
            };
            let map = apply_spatial_spread(&c, &patch, &m);
            assert_eq!(map.argmax(), Some(placed.slot));
        }
    }

    #[test]
    fn equidistant_taxels_equal() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let m = MaterialModel::default();
        let a = patch.taxel_world_position(0, 0).unwrap();
        let b = patch.taxel_world_position(0, 1).unwrap();
        let c = Contact {
            center_mm: Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0),
            diameter_mm: 7.0,
            pressure_kpa: 30.0,
        };
        let map = apply_spatial_spread(&c, &patch, &m);
        let sa = patch.slot(TaxelRef::new(0, 0)).unwrap();
        let sb = patch.slot(TaxelRef::new(0, 1)).unwrap();
        assert!((map.kpa[sa] - map.kpa[sb]).abs() < 1e-12 * map.kpa[sa]);
    }

    #[test]
    fn thermal_pads_receive_nothing() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let pad = patch.taxel_world_position(0, 6).unwrap();
        let c = Contact {
            center_mm: pad,
            diameter_mm: 7.0,
            pressure_kpa: 100.0,
        };
        let map = apply_spatial_spread(&c, &patch, &MaterialModel::default());
        assert_eq!(map.kpa[6], 0.0);
        assert_eq!(map.kpa[7], 0.0);
    }

    #[test]
    fn centred_reference_probe_transmits_applied_pressure() {
        let patch = build_patch(&single_triangle_layout()).unwrap();
        let c = Contact {
            center_mm: patch.taxel_world_position(0, 5).unwrap(),
            diameter_mm: 7.0,
            pressure_kpa: 40.0,
        };
        let map = apply_spatial_spread(&c, &patch, &MaterialModel::default());
        assert!((map.kpa[5] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn force_conserved_against_fine_grid() {
        // The whole field integrates to the applied force; the share landing on
        // the pads must agree with a brute-force integration of that field.
        let patch = build_patch(&flat_prototype_layout()).unwrap();
        let m = MaterialModel::default();
        for diameter in [2.0, 7.0] {
            let c = Contact {
                center_mm: Point2::new(58.3, 33.1),
                diameter_mm: diameter,
                pressure_kpa: 60.0,
            };
            let sigma = m.spread_sigma(diameter);
            let force = c.pressure_kpa * c.area_mm2();
            let map = apply_spatial_spread(&c, &patch, &m);
            let transmitted: f64 = patch.taxels().map(|t| map.kpa[t.slot] * t.descriptor.area_mm2).sum();

            let field = |p: Point2| {
                let dd = p.distance(c.center_mm);
                force * (-dd * dd / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
            };
            let h = 0.05;
            let n = (10.0 * sigma / h) as i64;
            let mut field_total = 0.0;
            for i in -n..n {
                for j in -n..n {
                    let p = Point2::new(c.center_mm.x + (i as f64 + 0.5) * h, c.center_mm.y + (j as f64 + 0.5) * h);
                    field_total += field(p) * h * h;
                }
            }
            let h = 0.01;
            let mut on_pads = 0.0;
            for t in patch.taxels().filter(|t| t.descriptor.kind == TaxelKind::Pressure) {
                let r = t.descriptor.pad_radius_mm();
                let k = (r / h).ceil() as i64;
                for i in -k..k {
                    for j in -k..k {
                        let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                        if x * x + y * y <= r * r {
                            on_pads += field(Point2::new(t.position.x + x, t.position.y + y)) * h * h;
                        }
                    }
                }
            }
            assert!((field_total - force).abs() < 0.01 * force);
            assert!((transmitted - on_pads).abs() < 0.01 * on_pads, "{transmitted} vs {on_pads}");
        }
    }
}
