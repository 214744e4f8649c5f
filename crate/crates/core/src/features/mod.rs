//! Local descriptors computed at keypoints, and the ESF global descriptor.
//!
//! Every local extractor resolves a keypoint to an *anchor*: the keypoint's
//! own source point when it has a valid normal, otherwise the nearest cloud
//! point with a valid normal inside the support radius (Uniform Sampling
//! centroids are synthesized and carry neither normal nor index). The support
//! neighborhood is gathered around the anchor, whose normal and color stand in
//! for the keypoint's. Keypoints without an anchor or without enough support
//! are dropped and counted.

mod esf;
mod fpfh;
mod pair;
mod pfh;
mod shot;

pub use esf::{compute_esf, EsfParams};
pub use fpfh::{compute_fpfh, FPFH_BINS};
pub use pair::{darboux_pair, PairFeature};
pub use pfh::{compute_pfh, compute_pfhrgb, PFH_BINS};
pub use shot::{compute_cshot, compute_shot, SHOT_COLOR_BINS, SHOT_COSINE_BINS, SHOT_SECTORS};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::cloud::{Neighbor, Normal3, PointCloud, SpatialIndex};
use crate::codec::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::keypoints::Keypoint;

/// Default PFH / PFH-RGB / FPFH support radius in meters.
pub const DEFAULT_PFH_RADIUS: f64 = 0.06;
/// Default SHOT / Color-SHOT support radius in meters.
pub const DEFAULT_SHOT_RADIUS: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Pfh,
    PfhRgb,
    Fpfh,
    Shot,
    CShot,
    Esf,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Pfh,
        FeatureKind::PfhRgb,
        FeatureKind::Fpfh,
        FeatureKind::Shot,
        FeatureKind::CShot,
        FeatureKind::Esf,
    ];

    pub const fn dimension(self) -> usize {
        match self {
            FeatureKind::Pfh => 125,
            FeatureKind::PfhRgb => 250,
            FeatureKind::Fpfh => 33,
            FeatureKind::Shot => 352,
            FeatureKind::CShot => 1344,
            FeatureKind::Esf => 640,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            FeatureKind::Pfh => "pfh",
            FeatureKind::PfhRgb => "pfhrgb",
            FeatureKind::Fpfh => "fpfh",
            FeatureKind::Shot => "shot",
            FeatureKind::CShot => "cshot",
            FeatureKind::Esf => "esf",
        }
    }

    pub const fn needs_color(self) -> bool {
        matches!(self, FeatureKind::PfhRgb | FeatureKind::CShot)
    }

    pub const fn is_global(self) -> bool {
        matches!(self, FeatureKind::Esf)
    }

    pub fn default_radius(self) -> f64 {
        match self {
            FeatureKind::Shot | FeatureKind::CShot => DEFAULT_SHOT_RADIUS,
            _ => DEFAULT_PFH_RADIUS,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        FeatureKind::ALL
            .get(tag as usize)
            .copied()
            .ok_or_else(|| Error::Container(format!("unknown feature kind tag {tag}")))
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL.into_iter().find(|k| k.name() == s.to_ascii_lowercase()).ok_or_else(|| {
            let names: Vec<_> = FeatureKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown feature `{s}`; supported: {}", names.join(", ")))
        })
    }
}

/// One descriptor; `values.len() == kind.dimension()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f32>) -> Result<Self> {
        if values.len() != kind.dimension() {
            return Err(Error::DimensionMismatch { expected: kind.dimension(), found: values.len() });
        }
        Ok(FeatureVector { kind, values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// The descriptors extracted from one cloud, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub source: String,
    values: Vec<f32>,
    /// Keypoints that could not be described.
    pub dropped: usize,
}

const FEATURE_MAGIC: &[u8; 4] = b"SLFS";
const FEATURE_VERSION: u16 = 1;

impl FeatureSet {
    pub fn new(kind: FeatureKind, source: impl Into<String>) -> Self {
        FeatureSet { kind, source: source.into(), values: Vec::new(), dropped: 0 }
    }

    pub fn dim(&self) -> usize {
        self.kind.dimension()
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Descriptors kept; `kept() + dropped` equals the number of input keypoints.
    pub fn kept(&self) -> usize {
        self.len()
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: row.len() });
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim()..(i + 1) * self.dim()]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim())
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.values
    }

    /// Binary container: magic `SLFS`, version, kind tag, dimension, count,
    /// dropped count, source name, then `count * dimension` little-endian f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(FEATURE_MAGIC, FEATURE_VERSION);
        w.u8(self.kind.tag());
        w.u32(self.dim() as u32);
        w.len(self.len());
        w.len(self.dropped);
        w.str(&self.source);
        for &v in &self.values {
            w.f32(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, FEATURE_MAGIC)?;
        if version != FEATURE_VERSION {
            return Err(Error::Container(format!("unsupported feature container version {version}")));
        }
        let kind = FeatureKind::from_tag(r.u8()?)?;
        let dim = r.u32()? as usize;
        if dim != kind.dimension() {
            return Err(Error::DimensionMismatch { expected: kind.dimension(), found: dim });
        }
        let count = r.u64()? as usize;
        let dropped = r.u64()? as usize;
        let source = r.str()?;
        let n = count.checked_mul(dim).ok_or_else(|| Error::Container("count overflow".into()))?;
        let mut values = Vec::with_capacity(n.min(bytes.len() / 4));
        for _ in 0..n {
            values.push(r.f32()?);
        }
        r.finish()?;
        Ok(FeatureSet { kind, source, values, dropped })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }

    /// Assembles a set from per-keypoint results in keypoint order.
    pub(crate) fn from_results(kind: FeatureKind, source: &str, results: Vec<Option<Vec<f32>>>) -> Self {
        let mut set = FeatureSet::new(kind, source);
        for r in results {
            match r {
                Some(row) => set.push(&row).expect("extractors emit fixed-size rows"),
                None => set.dropped += 1,
            }
        }
        set
    }
}

/// A cloud's points with valid normals, indexed for support queries.
pub(crate) struct Surface<'a> {
    pub cloud: &'a PointCloud,
    pub normals: &'a [Normal3],
    index: Option<SpatialIndex>,
}

impl<'a> Surface<'a> {
    pub fn new(cloud: &'a PointCloud) -> Result<Self> {
        let normals = cloud.normals.as_deref().ok_or(Error::MissingNormals)?;
        let valid = (0..cloud.len()).filter(|&i| normals[i].is_valid() && cloud.points[i].is_finite());
        let index = match SpatialIndex::from_points(valid.map(|i| (i, cloud.points[i].array()))) {
            Ok(index) => Some(index),
            Err(Error::EmptyCloud) => None,
            Err(e) => return Err(e),
        };
        Ok(Surface { cloud, normals, index })
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        self.cloud.points[i].coords()
    }

    pub fn normal(&self, i: usize) -> Vector3<f64> {
        self.normals[i].vector()
    }

    /// The cloud point describing `kp`, if any lies within `radius`.
    pub fn anchor(&self, kp: &Keypoint, radius: f64) -> Option<usize> {
        if let Some(i) = kp.source {
            if self.normals.get(i).is_some_and(Normal3::is_valid) {
                return Some(i);
            }
        }
        let nearest = self.index.as_ref()?.knn_search(kp.position, 1).ok()?;
        nearest.first().filter(|n| n.distance <= radius).map(|n| n.index)
    }

    /// Valid-normal points within `radius` of point `i`, `i` included.
    pub fn neighbors(&self, i: usize, radius: f64) -> Vec<Neighbor> {
        match &self.index {
            Some(index) => index.radius_search(self.cloud.points[i], radius).unwrap_or_default(),
            None => Vec::new(),
        }
    }
}

pub(crate) fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("feature radius must be positive, got {radius}")))
    }
}

pub(crate) fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

/// Scales `values` to unit sum; returns false (leaving them untouched) when the sum is zero.
pub(crate) fn normalize_l1(values: &mut [f64]) -> bool {
    let s: f64 = values.iter().sum();
    if s > 0.0 {
        values.iter_mut().for_each(|v| *v /= s);
        true
    } else {
        false
    }
}

pub(crate) fn normalize_l2(values: &mut [f64]) -> bool {
    let s: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s > 0.0 {
        values.iter_mut().for_each(|v| *v /= s);
        true
    } else {
        false
    }
}
