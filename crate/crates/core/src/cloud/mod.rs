//! Point clouds, PCD I/O, kd-tree search and normal estimation.

mod kdtree;
mod normals;
mod pcd;

pub use kdtree::{Neighbor, SpatialIndex};
pub use normals::{estimate_normals, estimate_normals_with_index};
pub use pcd::{load_pcd, parse_pcd, save_pcd, write_pcd, PcdEncoding};

use nalgebra::Vector3;

/// 8-bit RGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    /// PCL packs color as a float whose bit pattern is `0x00RRGGBB`.
    pub fn to_packed(self) -> u32 {
        (u32::from(self.r) << 16) | (u32::from(self.g) << 8) | u32::from(self.b)
    }

    pub fn from_packed(bits: u32) -> Self {
        Rgb { r: ((bits >> 16) & 0xff) as u8, g: ((bits >> 8) & 0xff) as u8, b: (bits & 0xff) as u8 }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub color: Option<Rgb>,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0, color: None };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z, color: None }
    }

    pub const fn with_color(x: f64, y: f64, z: f64, color: Rgb) -> Self {
        Point3 { x, y, z, color: Some(color) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn from_coords(v: Vector3<f64>, color: Option<Rgb>) -> Self {
        Point3 { x: v.x, y: v.y, z: v.z, color }
    }
}

/// Unit surface normal plus surface-variation curvature.
///
/// Points whose neighborhood is too small for a covariance estimate carry
/// [`Normal3::INVALID`] (all components NaN), which mirrors how PCD files
/// store missing normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal3 {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
    pub curvature: f64,
}

impl Normal3 {
    pub const INVALID: Normal3 = Normal3 { nx: f64::NAN, ny: f64::NAN, nz: f64::NAN, curvature: f64::NAN };

    /// Normalizes `(nx, ny, nz)`; a zero or non-finite vector yields `INVALID`.
    pub fn new(nx: f64, ny: f64, nz: f64, curvature: f64) -> Self {
        let v = Vector3::new(nx, ny, nz);
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Normal3::INVALID;
        }
        let u = v / n;
        Normal3 { nx: u.x, ny: u.y, nz: u.z, curvature }
    }

    pub fn is_valid(&self) -> bool {
        self.nx.is_finite() && self.ny.is_finite() && self.nz.is_finite()
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.nx, self.ny, self.nz)
    }
}

/// An ordered set of points with optional per-point normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Normal3>>,
    pub viewpoint: Point3,
    pub label: Option<String>,
}

impl Default for PointCloud {
    fn default() -> Self {
        PointCloud { points: Vec::new(), normals: None, viewpoint: Point3::ORIGIN, label: None }
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points, ..Default::default() }
    }

    pub fn with_viewpoint(mut self, viewpoint: Point3) -> Self {
        self.viewpoint = viewpoint;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_color(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.color.is_some())
    }

    /// Attaches normals, checking the parallel-length invariant.
    pub fn set_normals(&mut self, normals: Vec<Normal3>) -> crate::Result<()> {
        if normals.len() != self.points.len() {
            return Err(crate::Error::DimensionMismatch { expected: self.points.len(), found: normals.len() });
        }
        self.normals = Some(normals);
        Ok(())
    }

    pub fn normal(&self, i: usize) -> Option<&Normal3> {
        self.normals.as_ref().and_then(|n| n.get(i)).filter(|n| n.is_valid())
    }

    /// Axis-aligned bounds over finite points, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let mut it = self.points.iter().filter(|p| p.is_finite());
        let first = it.next()?.array();
        let (mut lo, mut hi) = (first, first);
        for p in it {
            for (d, v) in p.array().into_iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        Some((lo, hi))
    }

    /// Applies `x -> rotation * x + translation` to points, viewpoint and normals.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: &Vector3<f64>) -> Self {
        let map = |p: &Point3| Point3::from_coords(rotation * p.coords() + translation, p.color);
        PointCloud {
            points: self.points.iter().map(map).collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| {
                        if n.is_valid() {
                            let v = rotation * n.vector();
                            Normal3 { nx: v.x, ny: v.y, nz: v.z, curvature: n.curvature }
                        } else {
                            *n
                        }
                    })
                    .collect()
            }),
            viewpoint: map(&self.viewpoint),
            label: self.label.clone(),
        }
    }

    /// Drops non-finite points (and their normals), returning how many were removed.
    pub fn remove_non_finite(&mut self) -> usize {
        let before = self.points.len();
        if let Some(normals) = self.normals.as_mut() {
            let mut keep = self.points.iter().map(Point3::is_finite);
            normals.retain(|_| keep.next().unwrap());
        }
        self.points.retain(Point3::is_finite);
        before - self.points.len()
    }
}
