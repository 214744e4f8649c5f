use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::{Normal3, PointCloud, SpatialIndex};
use crate::error::{Error, Result};

/// Minimum neighborhood size (query point included) for a covariance normal.
pub(crate) const MIN_NORMAL_NEIGHBORS: usize = 3;

/// PCA normals over radius neighborhoods; see [`estimate_normals_with_index`].
pub fn estimate_normals(cloud: &PointCloud, radius: f64) -> Result<PointCloud> {
    let index = SpatialIndex::build(cloud)?;
    estimate_normals_with_index(cloud, &index, radius)
}

/// Returns a copy of `cloud` carrying one normal per point.
///
/// The normal is the eigenvector of the neighborhood covariance with the
/// smallest eigenvalue, oriented toward `cloud.viewpoint`; curvature is
/// `l0 / (l0 + l1 + l2)`. Points with fewer than three neighbors inside
/// `radius` get [`Normal3::INVALID`].
pub fn estimate_normals_with_index(cloud: &PointCloud, index: &SpatialIndex, radius: f64) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("normal radius must be positive, got {radius}")));
    }
    let viewpoint = cloud.viewpoint.coords();
    let normals: Vec<Normal3> = cloud
        .points
        .par_iter()
        .map(|p| {
            if !p.is_finite() {
                return Normal3::INVALID;
            }
            let hits = index.radius_search(p, radius).expect("radius validated");
            if hits.len() < MIN_NORMAL_NEIGHBORS {
                return Normal3::INVALID;
            }
            let neighborhood: Vec<Vector3<f64>> = hits.iter().map(|h| cloud.points[h.index].coords()).collect();
            let Some((mut n, curvature)) = plane_fit(&neighborhood) else {
                return Normal3::INVALID;
            };
            if n.dot(&(viewpoint - p.coords())) < 0.0 {
                n = -n;
            }
            Normal3::new(n.x, n.y, n.z, curvature)
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(out)
}

/// Smallest-eigenvalue eigenvector and surface variation of a point set.
pub(crate) fn plane_fit(points: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig.eigenvalues.iter().enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, &v)| {
            if v < best.1 {
                (i, v)
            } else {
                best
            }
        },
    );
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let curvature = if total > 0.0 { eig.eigenvalues[imin].max(0.0) / total } else { 0.0 };
    let normal = eig.eigenvectors.column(imin).into_owned();
    let len = normal.norm();
    (len.is_finite() && len > 0.0).then(|| (normal / len, curvature))
}
