use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::{DetectorParams, Keypoint, KeypointSet};
use crate::cloud::{PointCloud, SpatialIndex};
use crate::error::{Error, Result};

/// Responses at or below this are treated as zero (rounding noise on flat patches).
const RESPONSE_FLOOR: f64 = 1e-10;

/// Responses this close (relative) count as equal during suppression, so
/// rounding differences cannot flip which of two equivalent points survives.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisConfig {
    pub support_radius: f64,
    pub response_constant: f64,
    /// Fraction of the cloud's maximum response a point must reach.
    pub threshold: f64,
    pub nms_radius: f64,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        HarrisConfig { support_radius: 0.05, response_constant: 0.04, threshold: 0.01, nms_radius: 0.05 }
    }
}

impl HarrisConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.support_radius > 0.0
            && self.nms_radius > 0.0
            && self.threshold >= 0.0
            && self.response_constant.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid Harris3D configuration {self:?}")))
        }
    }
}

/// Harris response of every point with a valid normal (`None` elsewhere).
pub(crate) fn harris_responses(cloud: &PointCloud, config: &HarrisConfig) -> Result<Vec<Option<f64>>> {
    let normals = cloud.normals.as_ref().ok_or(Error::MissingNormals)?;
    let valid = (0..cloud.len()).filter(|&i| normals[i].is_valid() && cloud.points[i].is_finite());
    let index = match SpatialIndex::from_points(valid.map(|i| (i, cloud.points[i].array()))) {
        Ok(index) => index,
        Err(Error::EmptyCloud) => return Ok(vec![None; cloud.len()]),
        Err(e) => return Err(e),
    };
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            if !normals[i].is_valid() || !cloud.points[i].is_finite() {
                return None;
            }
            let hits = index.radius_search(cloud.points[i], config.support_radius).ok()?;
            let mut moment = Matrix3::zeros();
            for h in &hits {
                let n: Vector3<f64> = normals[h.index].vector();
                moment += n * n.transpose();
            }
            moment /= hits.len() as f64;
            let trace = moment.trace();
            let k = config.response_constant;
            Some(k + moment.determinant() - k * trace * trace)
        })
        .collect())
}

/// Harris3D over the covariance of normals.
///
/// `C` is the second-moment matrix `mean(n n^T)` of the valid normals inside
/// `support_radius` and `r(p) = k + det(C) - k * trace(C)^2`. Unit normals give
/// `trace(C) = 1`, so the offset makes planar and edge neighborhoods (rank-deficient
/// `C`) score zero while a three-plane corner scores up to 1/27.
///
/// Points below `threshold * max r` are discarded, then a point survives only
/// if it beats every other candidate within `nms_radius`. Responses within a
/// relative 1e-9 of each other count as equal, and the lower index wins.
/// Output is sorted by decreasing response.
pub fn harris3d(cloud: &PointCloud, config: &HarrisConfig) -> Result<KeypointSet> {
    config.validate()?;
    let responses = harris_responses(cloud, config)?;
    let max = responses.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let detector = DetectorParams::Harris3d(*config);
    if !(max > RESPONSE_FLOOR) {
        return Ok(KeypointSet { keypoints: Vec::new(), detector });
    }
    let cut = (config.threshold * max).max(RESPONSE_FLOOR);
    let candidates: Vec<(usize, f64)> = responses
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.filter(|&r| r >= cut && r > RESPONSE_FLOOR).map(|r| (i, r)))
        .collect();
    let mut response_of = vec![f64::NAN; cloud.len()];
    for &(i, r) in &candidates {
        response_of[i] = r;
    }
    let index = SpatialIndex::from_points(candidates.iter().map(|&(i, _)| (i, cloud.points[i].array())))?;

    let beats = |a: usize, b: usize| {
        let (ra, rb) = (response_of[a], response_of[b]);
        if (ra - rb).abs() <= TIE_TOLERANCE * ra.abs().max(rb.abs()) {
            a < b
        } else {
            ra > rb
        }
    };
    let mut survivors: Vec<(usize, f64)> = candidates
        .par_iter()
        .filter(|&&(i, _)| {
            index
                .radius_search(cloud.points[i], config.nms_radius)
                .expect("validated radius")
                .iter()
                .all(|h| h.index == i || beats(i, h.index))
        })
        .copied()
        .collect();
    survivors.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let keypoints = survivors
        .into_iter()
        .map(|(i, r)| Keypoint { position: cloud.points[i], source: Some(i), response: Some(r) })
        .collect();
    Ok(KeypointSet { keypoints, detector })
}
