//! Ensemble of Shape Functions: a global shape signature built from random
//! point triples, each statistic split by how the sampled lines cross the
//! cloud's voxelized volume.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{normalize_l1, to_f32, FeatureKind, FeatureVector};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const ESF_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EsfParams {
    /// Random triples drawn.
    pub samples: usize,
    /// Occupancy grid cells per axis.
    pub voxel_resolution: usize,
    pub seed: u64,
}

impl Default for EsfParams {
    fn default() -> Self {
        EsfParams { samples: 20_000, voxel_resolution: 64, seed: 0 }
    }
}

/// Where a sampled line runs relative to the occupied volume.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    In = 0,
    Out = 1,
    Mixed = 2,
}

// sub-histogram offsets, in units of ESF_BINS
const D2: usize = 0;
const RATIO: usize = 3;
const A3: usize = 4;
const D3: usize = 7;

struct Grid {
    min: Vector3<f64>,
    cell: f64,
    res: usize,
    occupied: Vec<bool>,
}

impl Grid {
    fn new(cloud: &PointCloud, res: usize, min: Vector3<f64>, edge: f64) -> Self {
        let mut grid = Grid { min, cell: edge / res as f64, res, occupied: vec![false; res * res * res] };
        for p in &cloud.points {
            let v = grid.voxel(&grid.local(&p.coords()));
            grid.occupied[v] = true;
        }
        grid
    }

    /// Position in cell units.
    fn local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.min) / self.cell
    }

    fn voxel(&self, local: &Vector3<f64>) -> usize {
        let c = |v: f64| (v.max(0.0) as usize).min(self.res - 1);
        (c(local.z) * self.res + c(local.y)) * self.res + c(local.x)
    }

    /// Occupied fraction of the voxels the segment crosses strictly between
    /// its endpoint voxels; 1 when there are none.
    fn line_ratio(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let (la, lb) = (self.local(a), self.local(b));
        let (va, vb) = (self.voxel(&la), self.voxel(&lb));
        let steps = ((lb - la).norm() * 2.0).ceil() as usize;
        let (mut seen, mut hit) = (0usize, 0usize);
        let mut last = va;
        for s in 1..steps {
            let v = self.voxel(&la.lerp(&lb, s as f64 / steps as f64));
            if v == last || v == va || v == vb {
                continue;
            }
            last = v;
            seen += 1;
            hit += usize::from(self.occupied[v]);
        }
        if seen == 0 {
            1.0
        } else {
            hit as f64 / seen as f64
        }
    }
}

fn classify(ratio: f64) -> Class {
    if ratio >= 1.0 {
        Class::In
    } else if ratio <= 0.0 {
        Class::Out
    } else {
        Class::Mixed
    }
}

fn bin(value: f64) -> usize {
    ((value * ESF_BINS as f64).max(0.0) as usize).min(ESF_BINS - 1)
}

/// ESF descriptor: ten 64-bin histograms, each scaled to unit sum.
///
/// Per random triple `(p1, p2, p3)`: the three side lengths go to the D2
/// histogram of their line class (in, out or mixed), and their in-fractions to
/// the ratio histogram. The angle at `p3` goes to the A3 histogram of the
/// opposite side's class. `sqrt(2 * area)` goes to the D3 histogram: in when
/// all sides are in, out when all are out, mixed otherwise. Lengths are
/// divided by the bounding-box diagonal, so the result does not depend on
/// scale. A sub-histogram that received no samples stays zero.
pub fn compute_esf(cloud: &PointCloud, params: &EsfParams) -> Result<FeatureVector> {
    if params.samples == 0 || params.voxel_resolution == 0 {
        return Err(Error::InvalidParameter(format!("invalid ESF parameters {params:?}")));
    }
    let mut clean = cloud.clone();
    clean.remove_non_finite();
    let n = clean.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("ESF needs at least 3 points, got {n}")));
    }
    let (lo, hi) = clean.bounds().ok_or(Error::EmptyCloud)?;
    let (min, max) = (Vector3::from(lo), Vector3::from(hi));
    let diag = (max - min).norm();
    if !(diag > 0.0) {
        return Err(Error::InsufficientData("ESF needs a cloud with non-zero extent".into()));
    }
    let edge = (max - min).max();
    let grid = Grid::new(&clean, params.voxel_resolution, min, edge);
    let pts: Vec<Vector3<f64>> = clean.points.iter().map(|p| p.coords()).collect();

    let mut hist = vec![0.0f64; 10 * ESF_BINS];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..params.samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        let (p1, p2, p3) = (&pts[i], &pts[j], &pts[k]);

        let mut classes = [Class::In; 3];
        for (slot, (a, b)) in [(p1, p2), (p2, p3), (p3, p1)].into_iter().enumerate() {
            let ratio = grid.line_ratio(a, b);
            let class = classify(ratio);
            classes[slot] = class;
            hist[(D2 + class as usize) * ESF_BINS + bin((b - a).norm() / diag)] += 1.0;
            hist[RATIO * ESF_BINS + bin(ratio)] += 1.0;
        }

        let (u, v) = (p1 - p3, p2 - p3);
        let (nu, nv) = (u.norm(), v.norm());
        if nu > 0.0 && nv > 0.0 {
            let angle = (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0).acos();
            hist[(A3 + classes[0] as usize) * ESF_BINS + bin(angle / std::f64::consts::PI)] += 1.0;
        }

        let area = u.cross(&v).norm() / 2.0;
        let d3_class = if classes.iter().all(|&c| c == Class::In) {
            Class::In
        } else if classes.iter().all(|&c| c == Class::Out) {
            Class::Out
        } else {
            Class::Mixed
        };
        hist[(D3 + d3_class as usize) * ESF_BINS + bin((2.0 * area).sqrt() / diag)] += 1.0;
    }

    for sub in hist.chunks_mut(ESF_BINS) {
        normalize_l1(sub);
    }
    FeatureVector::new(FeatureKind::Esf, to_f32(&hist))
}
