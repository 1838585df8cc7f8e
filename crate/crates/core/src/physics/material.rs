use serde::{Deserialize, Serialize};

use super::thermal::ThermalModel;
use super::PhysicsError;

/// Constant-slope region of the static pressure response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySegment {
    pub from_kpa: f64,
    pub to_kpa: f64,
    pub slope_ff_per_kpa: f64,
}

impl SensitivitySegment {
    pub const fn new(from_kpa: f64, to_kpa: f64, slope_ff_per_kpa: f64) -> Self {
        Self {
            from_kpa,
            to_kpa,
            slope_ff_per_kpa,
        }
    }
}

/// Transduction physics of one dielectric build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub name: String,
    /// Ordered, disjoint slope regions. Gaps between consecutive regions are
    /// bridged by a slope that varies linearly across the gap.
    pub sensitivity_segments: Vec<SensitivitySegment>,
    /// Largest possible unloading/loading branch gap, as a fraction of full scale.
    pub hysteresis_gap_fraction: f64,
    /// Peak of the unimodal gap profile relative to the bound above.
    pub hysteresis_profile_amplitude: f64,
    pub hysteresis_peak_kpa: f64,
    pub relaxation_tau_s: f64,
    /// Maps commanded indentation depth to pressure, `P = E * depth / thickness`.
    pub compressive_modulus_kpa: f64,
    pub spread_sigma_base_mm: f64,
    pub spread_sigma_probe_factor: f64,
    pub thermal: ThermalModel,
}

/// Loop gap measured on the fabric build at its worst pressure.
pub const FABRIC_LOOP_GAP_FF: f64 = 9.1;
/// Probe diameter used for the sensitivity characterization.
pub const REFERENCE_PROBE_DIAMETER_MM: f64 = 7.0;
const DEFAULT_SPREAD_FACTOR: f64 = 0.08;

impl MaterialModel {
    /// 3D air-mesh fabric dielectric.
    pub fn fabric_2013() -> Self {
        let mut m = Self {
            name: "fabric-2013".into(),
            sensitivity_segments: vec![
                SensitivitySegment::new(0.0, 45.0, 2.50),
                SensitivitySegment::new(65.0, 160.0, 0.86),
            ],
            hysteresis_gap_fraction: 0.05,
            hysteresis_profile_amplitude: 1.0,
            hysteresis_peak_kpa: 28.6,
            relaxation_tau_s: 4680.0,
            compressive_modulus_kpa: 143.0,
            spread_sigma_base_mm: 0.0,
            spread_sigma_probe_factor: DEFAULT_SPREAD_FACTOR,
            thermal: ThermalModel::default(),
        };
        m.hysteresis_profile_amplitude =
            FABRIC_LOOP_GAP_FF / (m.hysteresis_gap_fraction * m.full_scale_deltac());
        m.spread_sigma_base_mm = unit_transmission_sigma(
            REFERENCE_PROBE_DIAMETER_MM,
            crate::topology::PRESSURE_TAXEL_AREA_MM2,
        ) - DEFAULT_SPREAD_FACTOR * REFERENCE_PROBE_DIAMETER_MM / 2.0;
        m
    }

    /// Silicone-foam dielectric of the previous skin generation.
    pub fn foam_2008() -> Self {
        Self {
            name: "foam-2008".into(),
            sensitivity_segments: vec![SensitivitySegment::new(0.0, 160.0, 0.63)],
            ..Self::fabric_2013()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fabric-2013" => Some(Self::fabric_2013()),
            "foam-2008" => Some(Self::foam_2008()),
            _ => None,
        }
    }

    /// Upper end of the characterized pressure range.
    pub fn full_scale_kpa(&self) -> f64 {
        self.sensitivity_segments.last().map_or(0.0, |s| s.to_kpa)
    }

    /// Capacitance change at full-scale pressure.
    pub fn full_scale_deltac(&self) -> f64 {
        self.pieces().map(|p| p.integral(p.len())).sum()
    }

    fn pieces(&self) -> impl Iterator<Item = Piece> + '_ {
        let segs = &self.sensitivity_segments;
        let lead = segs.first().filter(|s| s.from_kpa > 0.0).map(|s| Piece {
            start: 0.0,
            end: s.from_kpa,
            slope_start: s.slope_ff_per_kpa,
            slope_end: s.slope_ff_per_kpa,
        });
        lead.into_iter().chain(segs.iter().enumerate().flat_map(move |(i, s)| {
            let own = Piece {
                start: s.from_kpa,
                end: s.to_kpa,
                slope_start: s.slope_ff_per_kpa,
                slope_end: s.slope_ff_per_kpa,
            };
            let blend = segs.get(i + 1).filter(|n| n.from_kpa > s.to_kpa).map(|n| Piece {
                start: s.to_kpa,
                end: n.from_kpa,
                slope_start: s.slope_ff_per_kpa,
                slope_end: n.slope_ff_per_kpa,
            });
            std::iter::once(own).chain(blend)
        }))
    }

    /// Static (virgin loading) capacitance change for pressure `p`.
    pub fn pressure_to_deltac(&self, p: f64) -> Result<f64, PhysicsError> {
        if p.is_nan() || p < 0.0 {
            return Err(PhysicsError::NegativePressure(p));
        }
        if p > self.full_scale_kpa() {
            return Err(PhysicsError::PressureOutOfRange(p));
        }
        Ok(self.static_deltac(p))
    }

    /// As [`Self::pressure_to_deltac`], saturating outside `[0, full scale]`.
    pub fn pressure_to_deltac_clamped(&self, p: f64) -> f64 {
        self.static_deltac(p.clamp(0.0, self.full_scale_kpa()))
    }

    fn static_deltac(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for piece in self.pieces() {
            if p <= piece.start {
                break;
            }
            acc += piece.integral((p.min(piece.end)) - piece.start);
        }
        acc
    }

    /// Exact inverse of the static curve.
    pub fn deltac_to_pressure(&self, deltac: f64) -> Result<f64, PhysicsError> {
        let full = self.full_scale_deltac();
        if deltac.is_nan() || deltac < 0.0 || deltac > full {
            return Err(PhysicsError::DeltaCOutOfRange(deltac));
        }
        let mut acc = 0.0;
        let mut last_end = 0.0;
        for piece in self.pieces() {
            let area = piece.integral(piece.len());
            if deltac <= acc + area {
                return Ok(piece.start + piece.solve(deltac - acc));
            }
            acc += area;
            last_end = piece.end;
        }
        Ok(last_end)
    }

    /// Linear elastic indentation law.
    pub fn depth_to_pressure(&self, depth_mm: f64, thickness_mm: f64) -> Result<f64, PhysicsError> {
        if depth_mm.is_nan() || depth_mm < 0.0 {
            return Err(PhysicsError::NegativeDepth(depth_mm));
        }
        if depth_mm >= thickness_mm {
            return Err(PhysicsError::DepthExceedsThickness {
                depth_mm,
                thickness_mm,
            });
        }
        Ok(self.compressive_modulus_kpa * depth_mm / thickness_mm)
    }

    /// Width of the receptive-field kernel for a probe of the given diameter.
    pub fn spread_sigma(&self, probe_diameter_mm: f64) -> f64 {
        self.spread_sigma_base_mm + self.spread_sigma_probe_factor * probe_diameter_mm / 2.0
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |path: &str, reason: String| out.push((path.to_string(), reason));
        let segs = &self.sensitivity_segments;
        if segs.is_empty() {
            bad("sensitivity_segments", "at least one segment required".into());
        }
        for (i, s) in segs.iter().enumerate() {
            let path = format!("sensitivity_segments[{i}]");
            if !(s.from_kpa >= 0.0 && s.to_kpa > s.from_kpa && s.to_kpa.is_finite()) {
                bad(&path, format!("range {}..{} kPa", s.from_kpa, s.to_kpa));
            }
            if !(s.slope_ff_per_kpa > 0.0 && s.slope_ff_per_kpa.is_finite()) {
                bad(&path, format!("slope {} must be > 0", s.slope_ff_per_kpa));
            }
            if i > 0 && s.from_kpa < segs[i - 1].to_kpa {
                bad(&path, "segments overlap or are out of order".into());
            }
        }
        if !(0.0..1.0).contains(&self.hysteresis_gap_fraction) {
            bad("hysteresis_gap_fraction", format!("{} not in [0, 1)", self.hysteresis_gap_fraction));
        }
        if !(0.0..=1.0).contains(&self.hysteresis_profile_amplitude) {
            bad(
                "hysteresis_profile_amplitude",
                format!("{} not in [0, 1]", self.hysteresis_profile_amplitude),
            );
        }
        if !(self.hysteresis_peak_kpa > 0.0 && self.hysteresis_peak_kpa < self.full_scale_kpa()) {
            bad("hysteresis_peak_kpa", "must lie strictly inside the pressure range".into());
        }
        if !(self.relaxation_tau_s > 0.0) {
            bad("relaxation_tau_s", "must be > 0".into());
        }
        if !(self.compressive_modulus_kpa > 0.0) {
            bad("compressive_modulus_kpa", "must be > 0".into());
        }
        if !(self.spread_sigma_base_mm >= 0.0 && self.spread_sigma_probe_factor >= 0.0)
            || !(self.spread_sigma_base_mm + self.spread_sigma_probe_factor > 0.0)
        {
            bad("spread_sigma", "base and factor must be >= 0 and not both zero".into());
        }
        for (path, reason) in self.thermal.violations() {
            out.push((format!("thermal.{path}"), reason));
        }
        out
    }
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self::fabric_2013()
    }
}

/// Kernel width at which a probe centred on a circular pad transmits exactly
/// the applied pressure to it: the disc-averaged Gaussian share
/// `(R/r)^2 (1 - exp(-r^2 / 2 sigma^2))` equals one.
pub fn unit_transmission_sigma(probe_diameter_mm: f64, pad_area_mm2: f64) -> f64 {
    let r2 = pad_area_mm2 / std::f64::consts::PI;
    let big_r2 = (probe_diameter_mm / 2.0).powi(2);
    (r2 / (-2.0 * (1.0 - r2 / big_r2).ln())).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    slope_start: f64,
    slope_end: f64,
}

impl Piece {
    fn len(&self) -> f64 {
        self.end - self.start
    }

    fn curvature(&self) -> f64 {
        (self.slope_end - self.slope_start) / self.len()
    }

    fn integral(&self, u: f64) -> f64 {
        self.slope_start * u + 0.5 * self.curvature() * u * u
    }

    /// Offset `u` into the piece where the integral reaches `area`.
    fn solve(&self, area: f64) -> f64 {
        let k = self.curvature();
        if k == 0.0 {
            return area / self.slope_start;
        }
        let disc = (self.slope_start * self.slope_start + 2.0 * k * area).max(0.0);
        2.0 * area / (self.slope_start + disc.sqrt())
    }
}
