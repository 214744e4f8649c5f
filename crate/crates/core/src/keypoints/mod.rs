//! Keypoint detectors: voxel-centroid Uniform Sampling and Harris3D.

mod harris;
mod uniform;

pub use harris::{harris3d, HarrisConfig};
pub use uniform::uniform_sampling;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Default Uniform Sampling voxel edge, in meters.
pub const DEFAULT_US_RADIUS: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub position: Point3,
    /// Index of the source point, `None` for synthesized voxel centroids.
    pub source: Option<usize>,
    /// Harris response; `None` for detectors without a score.
    pub response: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorParams {
    UniformSampling {
        radius: f64,
    },
    Harris3d(HarrisConfig),
    /// Hand-picked source indices.
    Explicit,
}

impl DetectorParams {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorParams::UniformSampling { .. } => "uniform_sampling",
            DetectorParams::Harris3d(_) => "harris3d",
            DetectorParams::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub keypoints: Vec<Keypoint>,
    pub detector: DetectorParams,
}

impl KeypointSet {
    /// Keypoints at the given source points of `cloud`.
    pub fn from_indices(cloud: &PointCloud, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let keypoints = indices
            .into_iter()
            .map(|i| {
                cloud
                    .points
                    .get(i)
                    .map(|p| Keypoint { position: *p, source: Some(i), response: None })
                    .ok_or_else(|| Error::InvalidParameter(format!("keypoint index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Ok(KeypointSet { keypoints, detector: DetectorParams::Explicit })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point3> {
        self.keypoints.iter().map(|k| &k.position)
    }
}
