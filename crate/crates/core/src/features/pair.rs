use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Geometric relation between two oriented points, expressed in the Darboux
/// frame of the source point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeature {
    /// `v . n_t`
    pub alpha: f64,
    /// `u . (p_t - p_s) / d`
    pub phi: f64,
    /// `atan2(w . n_t, u . n_t)`, in `(-pi, pi]`
    pub theta: f64,
    pub d: f64,
}

/// Pair feature with source/target disambiguation.
///
/// The source is the point whose normal makes the smaller angle with the
/// connecting line, so `darboux_pair(a, b) == darboux_pair(b, a)`.
pub fn darboux_pair(
    p_s: &Vector3<f64>,
    n_s: &Vector3<f64>,
    p_t: &Vector3<f64>,
    n_t: &Vector3<f64>,
) -> Result<PairFeature> {
    ordered_pair(p_s, n_s, p_t, n_t).map(|(f, _)| f)
}

/// As [`darboux_pair`], also reporting whether the arguments were swapped to
/// pick the source.
pub(crate) fn ordered_pair(
    p1: &Vector3<f64>,
    n1: &Vector3<f64>,
    p2: &Vector3<f64>,
    n2: &Vector3<f64>,
) -> Result<(PairFeature, bool)> {
    let delta = p2 - p1;
    let d = delta.norm();
    if !(d > 0.0) {
        return Err(Error::CoincidentPoints);
    }
    // |cos| of each normal against the line; larger |cos| = smaller angle
    let c1 = n1.dot(&delta).abs();
    let c2 = n2.dot(&delta).abs();
    let swap = c2 > c1 || (c1 == c2 && lex_less(p2, p1));
    let (ps, ns, pt, nt) = if swap { (p2, n2, p1, n1) } else { (p1, n1, p2, n2) };
    Ok((frame_features(ps, ns, pt, nt)?, swap))
}

fn lex_less(a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
    (a.x, a.y, a.z) < (b.x, b.y, b.z)
}

fn frame_features(ps: &Vector3<f64>, ns: &Vector3<f64>, pt: &Vector3<f64>, nt: &Vector3<f64>) -> Result<PairFeature> {
    let delta = pt - ps;
    let d = delta.norm();
    let e = delta / d;
    let u = *ns;
    let v = e.cross(&u);
    let vn = v.norm();
    if !(vn > 1e-12) {
        return Err(Error::DegenerateFrame);
    }
    let v = v / vn;
    let w = u.cross(&v);
    let alpha = v.dot(nt).clamp(-1.0, 1.0);
    let phi = u.dot(&e).clamp(-1.0, 1.0);
    let mut theta = w.dot(nt).atan2(u.dot(nt));
    if theta <= -PI {
        theta = PI;
    }
    Ok(PairFeature { alpha, phi, theta, d })
}

/// Bin of a value in `[lo, hi]` split into `bins` equal cells; the upper edge
/// belongs to the last cell.
pub(crate) fn bin_of(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((value - lo) / (hi - lo) * bins as f64).floor();
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

impl PairFeature {
    /// `(alpha, phi, theta)` bins for `bins` cells per angle.
    pub(crate) fn bins(&self, bins: usize) -> [usize; 3] {
        [bin_of(self.alpha, -1.0, 1.0, bins), bin_of(self.phi, -1.0, 1.0, bins), bin_of(self.theta, -PI, PI, bins)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn hand_computed_coplanar_pair() {
        let f = darboux_pair(&v(0.0, 0.0, 0.0), &v(0.0, 0.0, 1.0), &v(1.0, 0.0, 0.0), &v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((f.alpha, f.phi, f.theta.abs(), f.d), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn target_normal_along_v() {
        // both normals orthogonal to the line, so no swap; u = z, e = x, v = e x u = -y
        let f = darboux_pair(&v(0.0, 0.0, 0.0), &v(0.0, 0.0, 1.0), &v(2.0, 0.0, 0.0), &v(0.0, 1.0, 0.0)).unwrap();
        assert_eq!((f.alpha, f.phi, f.theta, f.d), (-1.0, 0.0, 0.0, 2.0));
    }

    #[test]
    fn source_is_the_normal_closer_to_the_line() {
        // n_t is parallel to the line, so the target becomes the source and the frame collapses
        let r = darboux_pair(&v(0.0, 0.0, 0.0), &v(0.0, 0.0, 1.0), &v(2.0, 0.0, 0.0), &v(1.0, 0.0, 0.0));
        assert!(matches!(r, Err(Error::DegenerateFrame)));
    }

    #[test]
    fn coincident_points_fail() {
        let p = v(1.0, 2.0, 3.0);
        let n = v(0.0, 0.0, 1.0);
        assert!(matches!(darboux_pair(&p, &n, &p, &n), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn line_along_both_normals_has_no_frame() {
        let n = v(0.0, 0.0, 1.0);
        let r = darboux_pair(&v(0.0, 0.0, 0.0), &n, &v(0.0, 0.0, 1.0), &n);
        assert!(matches!(r, Err(Error::DegenerateFrame)));
    }

    #[test]
    fn bins_cover_closed_ranges() {
        assert_eq!(bin_of(-1.0, -1.0, 1.0, 5), 0);
        assert_eq!(bin_of(0.0, -1.0, 1.0, 5), 2);
        assert_eq!(bin_of(1.0, -1.0, 1.0, 5), 4);
        assert_eq!(bin_of(PI, -PI, PI, 11), 10);
    }

    fn unit() -> impl Strategy<Value = Vector3<f64>> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| v(x, y, z).normalize())
    }

    fn point() -> impl Strategy<Value = Vector3<f64>> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn symmetric_under_argument_swap(a in point(), na in unit(), b in point(), nb in unit()) {
            let ab = darboux_pair(&a, &na, &b, &nb);
            let ba = darboux_pair(&b, &nb, &a, &na);
            match (ab, ba) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "asymmetric outcome {:?}", other),
            }
        }

        #[test]
        fn values_stay_in_range(a in point(), na in unit(), b in point(), nb in unit()) {
            if let Ok(f) = darboux_pair(&a, &na, &b, &nb) {
                prop_assert!((-1.0..=1.0).contains(&f.alpha));
                prop_assert!((-1.0..=1.0).contains(&f.phi));
                prop_assert!(f.theta > -PI && f.theta <= PI);
                prop_assert!(f.d > 0.0);
            }
        }

        #[test]
        fn equal_normals_perpendicular_to_line(a in point(), n in unit(), t in unit(), s in 0.01f64..1.0) {
            // displacement orthogonal to the shared normal
            let dir = n.cross(&t);
            prop_assume!(dir.norm() > 1e-3);
            let b = a + dir.normalize() * s;
            let f = darboux_pair(&a, &n, &b, &n).unwrap();
            prop_assert!(f.alpha.abs() < 1e-12);
            prop_assert!(f.phi.abs() < 1e-12);
        }
    }
}
