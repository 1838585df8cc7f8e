//! Geometry, channel layout and bus addressing of the skin mesh.
//!
//! Every triangle module is instantiated from one canonical template: an
//! equilateral triangle of [`TRIANGLE_SIDE_MM`] side carrying ten pressure
//! taxels on a four-row triangular grid of [`TAXEL_PITCH_MM`] pitch, plus two
//! thermal pads embedded in the flexible board. Triangle-local coordinates put
//! the first vertex at the origin, the second on the +x axis and the apex
//! above it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the canonical triangle module.
pub const TRIANGLE_SIDE_MM: f64 = 30.0;
/// Centre-to-centre spacing of neighbouring pressure taxels.
pub const TAXEL_PITCH_MM: f64 = 5.5;
/// Pad area of a pressure taxel on the current board revision.
pub const PRESSURE_TAXEL_AREA_MM2: f64 = 15.20;
/// Thermal pads use the same pad geometry as the pressure taxels.
pub const THERMAL_PAD_AREA_MM2: f64 = 15.20;
/// Channels digitized by one capacitance-to-digital converter.
pub const CHANNELS_PER_TRIANGLE: usize = 12;
/// Four I2C buses with four addresses each.
pub const MAX_TRIANGLES_PER_PATCH: usize = 16;
pub const I2C_BUSES: u8 = 4;
pub const I2C_ADDRESSES: u8 = 4;
/// Channels wired to the two embedded thermal pads.
pub const THERMAL_CHANNELS: [u8; 2] = [6, 7];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("duplicate I2C address: bus {bus}, address {addr}")]
    DuplicateAddress { bus: u8, addr: u8 },
    #[error("layout names {count} triangles, at most {MAX_TRIANGLES_PER_PATCH} fit on one patch")]
    TooManyTriangles { count: usize },
    #[error("malformed layout: {0}")]
    MalformedLayout(String),
    #[error("unknown taxel: triangle {triangle_id}, channel {channel}")]
    UnknownTaxel { triangle_id: u32, channel: u8 },
}

/// A point in millimetres. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Rigid 2D transform from triangle-local to patch coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub translation_mm: Point2,
    pub rotation_deg: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, rotation_deg: f64) -> Self {
        Self {
            translation_mm: Point2::new(x, y),
            rotation_deg,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Rotates about the local origin, then translates.
    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        Point2::new(
            c * p.x - s * p.y + self.translation_mm.x,
            s * p.x + c * p.y + self.translation_mm.y,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.translation_mm.x.is_finite()
            && self.translation_mm.y.is_finite()
            && self.rotation_deg.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxelKind {
    Pressure,
    Thermal,
}

/// Identifies a taxel within a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaxelRef {
    pub triangle_id: u32,
    pub channel: u8,
}

impl TaxelRef {
    pub const fn new(triangle_id: u32, channel: u8) -> Self {
        Self {
            triangle_id,
            channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxelDescriptor {
    pub triangle_id: u32,
    pub channel: u8,
    pub kind: TaxelKind,
    /// Triangle-local position of the pad centre.
    pub position_mm: Point2,
    pub area_mm2: f64,
    /// Taxels sharing a group drift identically with temperature. Groups 1..=5
    /// are pressure taxels, 6 and 7 the thermal pads.
    pub drift_group: u8,
}

impl TaxelDescriptor {
    pub fn taxel_ref(&self) -> TaxelRef {
        TaxelRef::new(self.triangle_id, self.channel)
    }

    /// Radius of a circular pad with the descriptor's area.
    pub fn pad_radius_mm(&self) -> f64 {
        (self.area_mm2 / std::f64::consts::PI).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleModule {
    pub id: u32,
    pub pose: Pose,
    pub i2c_bus: u8,
    pub i2c_addr: u8,
    pub taxels: Vec<TaxelDescriptor>,
}

impl TriangleModule {
    /// Position on the patch's serial chain, `bus * 4 + addr`.
    pub fn bus_index(&self) -> u8 {
        self.i2c_bus * I2C_ADDRESSES + self.i2c_addr
    }

    pub fn taxel(&self, channel: u8) -> Option<&TaxelDescriptor> {
        self.taxels.iter().find(|t| t.channel == channel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: u32,
    pub dielectric_thickness_mm: f64,
    pub triangles: Vec<TriangleModule>,
}

/// Taxel with its patch-frame position, as yielded by [`Patch::taxels`].
#[derive(Debug, Clone, Copy)]
pub struct PlacedTaxel<'a> {
    pub slot: usize,
    pub descriptor: &'a TaxelDescriptor,
    pub position: Point2,
}

impl Patch {
    pub fn triangle(&self, id: u32) -> Option<&TriangleModule> {
        self.triangles.iter().find(|t| t.id == id)
    }

    pub fn taxel(&self, taxel: TaxelRef) -> Option<&TaxelDescriptor> {
        self.triangle(taxel.triangle_id)?.taxel(taxel.channel)
    }

    /// Triangle at serial-chain position `index` (`bus * 4 + addr`).
    pub fn triangle_at_bus_index(&self, index: u32) -> Option<&TriangleModule> {
        self.triangles.iter().find(|t| t.bus_index() as u32 == index)
    }

    /// Dense index of a taxel: triangle storage order, then channel.
    pub fn slot(&self, taxel: TaxelRef) -> Option<usize> {
        let pos = self
            .triangles
            .iter()
            .position(|t| t.id == taxel.triangle_id)?;
        let tri = &self.triangles[pos];
        let within = tri.taxels.iter().position(|t| t.channel == taxel.channel)?;
        Some(self.slot_offset(pos) + within)
    }

    fn slot_offset(&self, triangle_pos: usize) -> usize {
        self.triangles[..triangle_pos]
            .iter()
            .map(|t| t.taxels.len())
            .sum()
    }

    pub fn slot_count(&self) -> usize {
        self.triangles.iter().map(|t| t.taxels.len()).sum()
    }

    pub fn taxel_world_position(&self, triangle_id: u32, channel: u8) -> Result<Point2, TopologyError> {
        let tri = self
            .triangle(triangle_id)
            .ok_or(TopologyError::UnknownTaxel { triangle_id, channel })?;
        let taxel = tri
            .taxel(channel)
            .ok_or(TopologyError::UnknownTaxel { triangle_id, channel })?;
        Ok(tri.pose.apply(taxel.position_mm))
    }

    /// All taxels in slot order with their patch-frame positions.
    pub fn taxels(&self) -> impl Iterator<Item = PlacedTaxel<'_>> + '_ {
        self.triangles
            .iter()
            .flat_map(|tri| tri.taxels.iter().map(move |t| (tri, t)))
            .enumerate()
            .map(|(slot, (tri, t))| PlacedTaxel {
                slot,
                descriptor: t,
                position: tri.pose.apply(t.position_mm),
            })
    }

    /// Taxels within `radius` of `point`, nearest first, ties broken by
    /// `(triangle_id, channel)`.
    pub fn taxels_within_radius(&self, point: Point2, radius: f64) -> Vec<TaxelRef> {
        let mut hits: Vec<(f64, TaxelRef)> = self
            .taxels()
            .map(|t| (t.position.distance(point), t.descriptor.taxel_ref()))
            .filter(|(d, _)| *d <= radius)
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        hits.into_iter().map(|(_, r)| r).collect()
    }

    /// True when `point` lies on some triangle of the patch.
    pub fn contains(&self, point: Point2) -> bool {
        self.triangles.iter().any(|tri| {
            let (s, c) = (-tri.pose.rotation_deg.to_radians()).sin_cos();
            let dx = point.x - tri.pose.translation_mm.x;
            let dy = point.y - tri.pose.translation_mm.y;
            inside_canonical_triangle(Point2::new(c * dx - s * dy, s * dx + c * dy), 1e-9)
        })
    }
}

/// Vertices of the canonical triangle in its local frame.
pub fn canonical_vertices() -> [Point2; 3] {
    let h = TRIANGLE_SIDE_MM * 3f64.sqrt() / 2.0;
    [
        Point2::new(0.0, 0.0),
        Point2::new(TRIANGLE_SIDE_MM, 0.0),
        Point2::new(TRIANGLE_SIDE_MM / 2.0, h),
    ]
}

/// Barycentric inside test against the canonical outline, `tol` in mm.
pub fn inside_canonical_triangle(p: Point2, tol: f64) -> bool {
    let [a, b, c] = canonical_vertices();
    let edge = |u: Point2, v: Point2| {
        let len = u.distance(v);
        ((v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x)) / len
    };
    edge(a, b) >= -tol && edge(b, c) >= -tol && edge(c, a) >= -tol
}

/// The canonical 12-channel template for a triangle with the given id.
///
/// Pressure taxels sit on rows of 4, 3, 2 and 1 centred on the triangle's
/// centroid; channel 5 is the central taxel. The thermal pads on channels 6
/// and 7 sit under the two lower grid cells. Drift groups pair taxels that
/// mirror each other across the triangle's vertical axis.
pub fn triangle_template(triangle_id: u32) -> Vec<TaxelDescriptor> {
    let p = TAXEL_PITCH_MM;
    let cx = TRIANGLE_SIDE_MM / 2.0;
    let cy = TRIANGLE_SIDE_MM / (2.0 * 3f64.sqrt());
    let row_height = p * 3f64.sqrt() / 2.0;
    let y0 = cy - row_height;
    let grid = |row: usize, k: usize| {
        let n = 4 - row;
        Point2::new(cx + (k as f64 - (n as f64 - 1.0) / 2.0) * p, y0 + row as f64 * row_height)
    };
    let centroid3 = |a: Point2, b: Point2, c: Point2| Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);

    // (channel, kind, position, drift group)
    let layout: [(u8, TaxelKind, Point2, u8); 12] = [
        (0, TaxelKind::Pressure, grid(0, 0), 1),
        (1, TaxelKind::Pressure, grid(0, 1), 2),
        (2, TaxelKind::Pressure, grid(0, 2), 2),
        (3, TaxelKind::Pressure, grid(0, 3), 1),
        (4, TaxelKind::Pressure, grid(1, 0), 3),
        (5, TaxelKind::Pressure, grid(1, 1), 5),
        (6, TaxelKind::Thermal, centroid3(grid(0, 0), grid(0, 1), grid(1, 0)), 6),
        (7, TaxelKind::Thermal, centroid3(grid(0, 2), grid(0, 3), grid(1, 2)), 7),
        (8, TaxelKind::Pressure, grid(1, 2), 3),
        (9, TaxelKind::Pressure, grid(2, 0), 4),
        (10, TaxelKind::Pressure, grid(2, 1), 4),
        (11, TaxelKind::Pressure, grid(3, 0), 5),
    ];
    layout
        .into_iter()
        .map(|(channel, kind, position_mm, drift_group)| TaxelDescriptor {
            triangle_id,
            channel,
            kind,
            position_mm,
            area_mm2: match kind {
                TaxelKind::Pressure => PRESSURE_TAXEL_AREA_MM2,
                TaxelKind::Thermal => THERMAL_PAD_AREA_MM2,
            },
            drift_group,
        })
        .collect()
}

/// Channel of the taxel at the triangle's centroid.
pub const CENTRAL_CHANNEL: u8 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrianglePlacement {
    pub id: u32,
    pub pose: Pose,
    pub bus: u8,
    pub addr: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchLayout {
    pub id: u32,
    pub dielectric_thickness_mm: f64,
    pub triangles: Vec<TrianglePlacement>,
}

/// Instantiates the canonical template for every placement of `layout`.
pub fn build_patch(layout: &PatchLayout) -> Result<Patch, TopologyError> {
    if layout.triangles.len() > MAX_TRIANGLES_PER_PATCH {
        return Err(TopologyError::TooManyTriangles {
            count: layout.triangles.len(),
        });
    }
    if layout.triangles.is_empty() {
        return Err(TopologyError::MalformedLayout("no triangles".into()));
    }
    if !(layout.dielectric_thickness_mm > 0.0 && layout.dielectric_thickness_mm.is_finite()) {
        return Err(TopologyError::MalformedLayout(format!(
            "dielectric thickness {} mm",
            layout.dielectric_thickness_mm
        )));
    }
    let mut seen_addr = Vec::new();
    let mut seen_id = Vec::new();
    for t in &layout.triangles {
        if t.bus >= I2C_BUSES || t.addr >= I2C_ADDRESSES {
            return Err(TopologyError::MalformedLayout(format!(
                "triangle {}: bus {} address {} out of range",
                t.id, t.bus, t.addr
            )));
        }
        if !t.pose.is_finite() {
            return Err(TopologyError::MalformedLayout(format!("triangle {}: non-finite pose", t.id)));
        }
        if seen_addr.contains(&(t.bus, t.addr)) {
            return Err(TopologyError::DuplicateAddress { bus: t.bus, addr: t.addr });
        }
        if seen_id.contains(&t.id) {
            return Err(TopologyError::MalformedLayout(format!("duplicate triangle id {}", t.id)));
        }
        seen_addr.push((t.bus, t.addr));
        seen_id.push(t.id);
    }
    Ok(Patch {
        id: layout.id,
        dielectric_thickness_mm: layout.dielectric_thickness_mm,
        triangles: layout
            .triangles
            .iter()
            .map(|t| TriangleModule {
                id: t.id,
                pose: t.pose,
                i2c_bus: t.bus,
                i2c_addr: t.addr,
                taxels: triangle_template(t.id),
            })
            .collect(),
    })
}

fn tiled_pose(row: usize, col: usize, x0: f64) -> Pose {
    let s = TRIANGLE_SIDE_MM;
    let h = s * 3f64.sqrt() / 2.0;
    let j = (col / 2) as f64;
    let y = row as f64 * h;
    if col.is_multiple_of(2) {
        Pose::new(x0 + j * s, y, 0.0)
    } else {
        // Inverted triangle filling the gap between two upright ones.
        Pose::new(x0 + j * s + 1.5 * s, y + h, 180.0)
    }
}

fn placements(poses: impl IntoIterator<Item = Pose>) -> Vec<TrianglePlacement> {
    poses
        .into_iter()
        .enumerate()
        .map(|(i, pose)| TrianglePlacement {
            id: i as u32,
            pose,
            bus: (i / I2C_ADDRESSES as usize) as u8,
            addr: (i % I2C_ADDRESSES as usize) as u8,
        })
        .collect()
}

/// Sixteen triangles tiled into one large flat triangle (rows of 7, 5, 3, 1).
pub fn flat_prototype_layout() -> PatchLayout {
    let mut poses = Vec::new();
    for row in 0..4 {
        let n = 4 - row;
        for col in 0..(2 * n - 1) {
            poses.push(tiled_pose(row, col, row as f64 * TRIANGLE_SIDE_MM / 2.0));
        }
    }
    PatchLayout {
        id: 0,
        dielectric_thickness_mm: 2.0,
        triangles: placements(poses),
    }
}

/// Sixteen triangles as two strips of eight, the developed forearm cover.
pub fn forearm_layout() -> PatchLayout {
    let mut poses = Vec::new();
    for row in 0..2 {
        for col in 0..8 {
            poses.push(tiled_pose(row, col, row as f64 * TRIANGLE_SIDE_MM / 2.0));
        }
    }
    PatchLayout {
        id: 0,
        dielectric_thickness_mm: 2.0,
        triangles: placements(poses),
    }
}

/// One triangle at the identity pose on bus 0, address 0.
pub fn single_triangle_layout() -> PatchLayout {
    PatchLayout {
        id: 0,
        dielectric_thickness_mm: 2.0,
        triangles: placements([Pose::identity()]),
    }
}
