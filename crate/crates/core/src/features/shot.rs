use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::pair::bin_of;
use super::{check_radius, normalize_l2, to_f32, FeatureKind, FeatureSet, Surface};
use crate::cloud::{Neighbor, PointCloud};
use crate::error::{Error, Result};
use crate::keypoints::KeypointSet;

/// 8 azimuth x 2 elevation x 2 radial shells.
pub const SHOT_SECTORS: usize = 32;
pub const SHOT_COSINE_BINS: usize = 11;
pub const SHOT_COLOR_BINS: usize = 31;

const AZIMUTH_SECTORS: usize = 8;
/// Second eigenvalue below this fraction of the first means a collinear support.
const DEGENERATE_RATIO: f64 = 1e-9;

/// SHOT with nearest-bin assignment (no interpolation between sectors or
/// bins), L2-normalized.
pub fn compute_shot(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Result<FeatureSet> {
    extract(cloud, keypoints, radius, false)
}

/// SHOT followed by per-sector histograms of the L1 color distance to the
/// keypoint, `sum_c |c_k - c_i| / 765`. Each half is L2-normalized on its own,
/// so the shape half equals [`compute_shot`] exactly.
pub fn compute_cshot(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Result<FeatureSet> {
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
    let kind = if color { FeatureKind::CShot } else { FeatureKind::Shot };
    Ok(FeatureSet::from_results(kind, "", results))
}

/// Rows are the x, y, z axes of the local reference frame.
fn reference_frame(surface: &Surface, anchor: usize, support: &[Neighbor], radius: f64) -> Option<Matrix3<f64>> {
    let p = surface.position(anchor);
    let mut cov = Matrix3::zeros();
    let mut total = 0.0;
    for n in support {
        let w = radius - n.distance;
        let q = surface.position(n.index) - p;
        cov += w * q * q.transpose();
        total += w;
    }
    if !(total > 0.0) {
        return None;
    }
    cov /= total;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (small, mid, large) = (order[0], order[1], order[2]);
    let (l_mid, l_large) = (eig.eigenvalues[mid], eig.eigenvalues[large]);
    if !(l_large > 0.0) || l_mid <= DEGENERATE_RATIO * l_large {
        return None;
    }

    let displacements: Vec<Vector3<f64>> = support.iter().map(|n| surface.position(n.index) - p).collect();
    let mut x: Vector3<f64> = eig.eigenvectors.column(large).into();
    let mut z: Vector3<f64> = eig.eigenvectors.column(small).into();
    match majority(&displacements, &x) {
        Some(true) => {}
        Some(false) => x = -x,
        None => {
            if displacements.iter().map(|q| q.dot(&x)).sum::<f64>() < 0.0 {
                x = -x;
            }
        }
    }
    match majority(&displacements, &z) {
        Some(true) => {}
        Some(false) => z = -z,
        None => {
            if z.dot(&(surface.cloud.viewpoint.coords() - p)) < 0.0 {
                z = -z;
            }
        }
    }
    let y = z.cross(&x);
    Some(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
}

/// `Some(true)` when more projections are non-negative than negative, `None` on a tie.
fn majority(displacements: &[Vector3<f64>], axis: &Vector3<f64>) -> Option<bool> {
    let positive = displacements.iter().filter(|q| q.dot(axis) >= 0.0).count();
    let negative = displacements.len() - positive;
    (positive != negative).then_some(positive > negative)
}

fn sector(local: &Vector3<f64>, distance: f64, radius: f64) -> usize {
    let azimuth = bin_of(local.y.atan2(local.x), -PI, PI, AZIMUTH_SECTORS);
    let elevation = usize::from(local.z >= 0.0);
    let shell = usize::from(distance >= radius / 2.0);
    (shell * 2 + elevation) * AZIMUTH_SECTORS + azimuth
}

fn describe(surface: &Surface, anchor: usize, radius: f64, color: bool) -> Option<Vec<f32>> {
    let support: Vec<Neighbor> = surface.neighbors(anchor, radius).into_iter().filter(|n| n.distance > 0.0).collect();
    let frame = reference_frame(surface, anchor, &support, radius)?;
    let p = surface.position(anchor);
    let n_anchor = surface.normal(anchor);
    let c_anchor = surface.cloud.points[anchor].color.unwrap_or_default().channels();

    let mut shape = vec![0.0f64; SHOT_SECTORS * SHOT_COSINE_BINS];
    let mut hue = vec![0.0f64; if color { SHOT_SECTORS * SHOT_COLOR_BINS } else { 0 }];
    for n in &support {
        let local = frame * (surface.position(n.index) - p);
        let s = sector(&local, n.distance, radius);
        let cos = surface.normal(n.index).dot(&n_anchor).clamp(-1.0, 1.0);
        shape[s * SHOT_COSINE_BINS + bin_of(cos, -1.0, 1.0, SHOT_COSINE_BINS)] += 1.0;
        if color {
            let c = surface.cloud.points[n.index].color.unwrap_or_default().channels();
            let diff: u32 = (0..3).map(|k| u32::from(c_anchor[k].abs_diff(c[k]))).sum();
            let t = f64::from(diff) / 765.0;
            hue[s * SHOT_COLOR_BINS + bin_of(t, 0.0, 1.0, SHOT_COLOR_BINS)] += 1.0;
        }
    }
    normalize_l2(&mut shape);
    normalize_l2(&mut hue);
    shape.extend(hue);
    Some(to_f32(&shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{estimate_normals, Point3, Rgb};

    fn plane(color: Option<Rgb>) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                // slight irregularity keeps the in-plane frame well defined
                let (x, y) = (i as f64 * 0.01 + 0.001 * (j % 3) as f64, j as f64 * 0.01);
                pts.push(Point3 { x, y, z: 0.0, color });
            }
        }
        estimate_normals(&PointCloud::new(pts).with_viewpoint(Point3::new(0.0, 0.0, 1.0)), 0.025).unwrap()
    }

    #[test]
    fn plane_fills_only_top_cosine_bins() {
        let cloud = plane(None);
        let kps = KeypointSet::from_indices(&cloud, [465, 100]).unwrap();
        let set = compute_shot(&cloud, &kps, 0.08).unwrap();
        assert_eq!((set.kept(), set.dim()), (2, 352));
        for row in set.rows() {
            let norm: f64 = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
            for (i, &v) in row.iter().enumerate() {
                if i % SHOT_COSINE_BINS != SHOT_COSINE_BINS - 1 {
                    assert_eq!(v, 0.0, "bin {i}");
                }
            }
        }
    }

    #[test]
    fn uniform_color_lands_in_first_color_bin() {
        let cloud = plane(Some(Rgb::new(10, 200, 90)));
        let kps = KeypointSet::from_indices(&cloud, [465]).unwrap();
        let c = compute_cshot(&cloud, &kps, 0.08).unwrap();
        let s = compute_shot(&cloud, &kps, 0.08).unwrap();
        assert_eq!(c.dim(), 1344);
        assert_eq!(&c.row(0)[..352], s.row(0));
        let hue = &c.row(0)[352..];
        assert!(hue.iter().any(|&v| v > 0.0));
        for (i, &v) in hue.iter().enumerate() {
            if i % SHOT_COLOR_BINS != 0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn collinear_support_is_dropped() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        let n = pts.len();
        let mut cloud = PointCloud::new(pts);
        cloud.set_normals(vec![crate::cloud::Normal3::new(0.0, 0.0, 1.0, 0.0); n]).unwrap();
        let kps = KeypointSet::from_indices(&cloud, [10]).unwrap();
        let set = compute_shot(&cloud, &kps, 0.05).unwrap();
        assert_eq!((set.kept(), set.dropped), (0, 1));
    }

    #[test]
    fn color_is_required_for_cshot() {
        let cloud = plane(None);
        let kps = KeypointSet::from_indices(&cloud, [0]).unwrap();
        assert!(matches!(compute_cshot(&cloud, &kps, 0.08), Err(Error::MissingColor)));
    }
}
