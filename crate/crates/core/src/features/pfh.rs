use rayon::prelude::*;

use super::pair::{bin_of, ordered_pair};
use super::{check_radius, to_f32, FeatureKind, FeatureSet, Surface};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::keypoints::KeypointSet;

/// Bins per angle; the joint histogram has `PFH_BINS^3` cells. The pair
/// distance is not binned.
pub const PFH_BINS: usize = 5;
const PFH_DIM: usize = PFH_BINS * PFH_BINS * PFH_BINS;

/// Point Feature Histogram: joint `(alpha, phi, theta)` histogram over every
/// unordered pair in the keypoint's support, normalized to unit sum.
pub fn compute_pfh(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Result<FeatureSet> {
    extract(cloud, keypoints, radius, false)
}

/// PFH followed by a joint histogram of per-channel color ratios
/// `c_s / (c_s + c_t)` (0.5 when both are zero); each half sums to one.
pub fn compute_pfhrgb(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Result<FeatureSet> {
    if !cloud.has_color() {
        return Err(Error::MissingColor);
    }
    extract(cloud, keypoints, radius, true)
}

fn extract(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64, color: bool) -> Result<FeatureSet> {
    check_radius(radius)?;
    let surface = Surface::new(cloud)?;
    let results: Vec<Option<Vec<f32>>> = keypoints
        .keypoints
        .par_iter()
        .map(|kp| {
            let anchor = surface.anchor(kp, radius)?;
            describe(&surface, anchor, radius, color)
        })
        .collect();
    let kind = if color { FeatureKind::PfhRgb } else { FeatureKind::Pfh };
    Ok(FeatureSet::from_results(kind, "", results))
}

fn joint(bins: [usize; 3]) -> usize {
    (bins[0] * PFH_BINS + bins[1]) * PFH_BINS + bins[2]
}

fn color_ratio(s: u8, t: u8) -> f64 {
    let sum = u16::from(s) + u16::from(t);
    if sum == 0 {
        0.5
    } else {
        f64::from(s) / f64::from(sum)
    }
}

fn describe(surface: &Surface, anchor: usize, radius: f64, color: bool) -> Option<Vec<f32>> {
    let support: Vec<usize> = surface.neighbors(anchor, radius).iter().map(|n| n.index).collect();
    if support.len() < 2 {
        return None;
    }
    let mut geo = vec![0.0f64; PFH_DIM];
    let mut rgb = vec![0.0f64; if color { PFH_DIM } else { 0 }];
    let mut pairs = 0usize;
    for (a, &i) in support.iter().enumerate() {
        let (pi, ni) = (surface.position(i), surface.normal(i));
        for &j in &support[a + 1..] {
            let Ok((f, swapped)) = ordered_pair(&pi, &ni, &surface.position(j), &surface.normal(j)) else {
                continue;
            };
            geo[joint(f.bins(PFH_BINS))] += 1.0;
            if color {
                let (s, t) = if swapped { (j, i) } else { (i, j) };
                let cs = surface.cloud.points[s].color.unwrap_or_default().channels();
                let ct = surface.cloud.points[t].color.unwrap_or_default().channels();
                let bins = [0, 1, 2].map(|c| bin_of(color_ratio(cs[c], ct[c]), 0.0, 1.0, PFH_BINS));
                rgb[joint(bins)] += 1.0;
            }
            pairs += 1;
        }
    }
    if pairs == 0 {
        return None;
    }
    let scale = 1.0 / pairs as f64;
    geo.iter_mut().chain(rgb.iter_mut()).for_each(|v| *v *= scale);
    geo.extend(rgb);
    Some(to_f32(&geo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{estimate_normals, Point3, Rgb};

    fn plane(color: Option<Rgb>) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..25 {
            for j in 0..25 {
                let (x, y) = (i as f64 * 0.01, j as f64 * 0.01);
                pts.push(Point3 { x, y, z: 0.0, color });
            }
        }
        estimate_normals(&PointCloud::new(pts).with_viewpoint(Point3::new(0.0, 0.0, 1.0)), 0.025).unwrap()
    }

    #[test]
    fn plane_concentrates_in_one_bin() {
        let cloud = plane(None);
        let kps = KeypointSet::from_indices(&cloud, [312, 0, 100]).unwrap();
        let set = compute_pfh(&cloud, &kps, 0.04).unwrap();
        assert_eq!(set.len(), 3);
        let zero_bin = joint([2, 2, 2]);
        for row in set.rows() {
            assert_eq!(row.len(), 125);
            assert!((row[zero_bin] - 1.0).abs() < 1e-6);
            assert!((row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_color_fills_the_half_ratio_bin() {
        let cloud = plane(Some(Rgb::new(120, 30, 0)));
        let kps = KeypointSet::from_indices(&cloud, [312]).unwrap();
        let rgb = compute_pfhrgb(&cloud, &kps, 0.04).unwrap();
        let geo = compute_pfh(&cloud, &kps, 0.04).unwrap();
        assert_eq!(rgb.dim(), 250);
        assert_eq!(&rgb.row(0)[..125], geo.row(0));
        let half = joint([2, 2, 2]);
        assert!((rgb.row(0)[125 + half] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn color_is_required_for_pfhrgb() {
        let cloud = plane(None);
        let kps = KeypointSet::from_indices(&cloud, [0]).unwrap();
        assert!(matches!(compute_pfhrgb(&cloud, &kps, 0.04), Err(Error::MissingColor)));
    }

    #[test]
    fn sparse_keypoints_are_dropped_and_counted() {
        let mut cloud = plane(None);
        cloud.points.push(Point3::new(5.0, 5.0, 5.0));
        let mut normals = cloud.normals.take().unwrap();
        normals.push(crate::cloud::Normal3::new(0.0, 0.0, 1.0, 0.0));
        cloud.set_normals(normals).unwrap();
        let lone = cloud.len() - 1;
        let kps = KeypointSet::from_indices(&cloud, [lone, 10]).unwrap();
        let set = compute_pfh(&cloud, &kps, 0.04).unwrap();
        assert_eq!((set.kept(), set.dropped), (1, 1));
    }
}
