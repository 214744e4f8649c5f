use std::collections::BTreeMap;

use super::{DetectorParams, Keypoint, KeypointSet};
use crate::cloud::{Point3, PointCloud, Rgb};
use crate::error::{Error, Result};

#[derive(Default)]
struct Voxel {
    sum: [f64; 3],
    color: [u64; 3],
    colored: u64,
    count: u64,
}

/// One keypoint per occupied voxel, placed at the mean of the voxel's points.
///
/// The grid has edge `radius` and is anchored at the cloud's minimum corner,
/// so the output is deterministic for a given cloud but not translation
/// invariant. Keypoints come out in lexicographic voxel order.
pub fn uniform_sampling(cloud: &PointCloud, radius: f64) -> Result<KeypointSet> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("uniform sampling radius must be positive, got {radius}")));
    }
    let (lo, _) = cloud.bounds().ok_or(Error::EmptyCloud)?;

    let mut voxels: BTreeMap<[i64; 3], Voxel> = BTreeMap::new();
    for p in cloud.points.iter().filter(|p| p.is_finite()) {
        let c = p.array();
        let key = [0, 1, 2].map(|d| ((c[d] - lo[d]) / radius).floor() as i64);
        let v = voxels.entry(key).or_default();
        for (acc, x) in v.sum.iter_mut().zip(c) {
            *acc += x;
        }
        v.count += 1;
        if let Some(rgb) = p.color {
            for (acc, ch) in v.color.iter_mut().zip(rgb.channels()) {
                *acc += u64::from(ch);
            }
            v.colored += 1;
        }
    }

    let keypoints = voxels
        .into_values()
        .map(|v| {
            let n = v.count as f64;
            let color = (v.colored > 0).then(|| {
                let [r, g, b] = v.color.map(|s| ((s as f64) / v.colored as f64).round() as u8);
                Rgb::new(r, g, b)
            });
            Keypoint {
                position: Point3 { x: v.sum[0] / n, y: v.sum[1] / n, z: v.sum[2] / n, color },
                source: None,
                response: None,
            }
        })
        .collect();
    Ok(KeypointSet { keypoints, detector: DetectorParams::UniformSampling { radius } })
}
