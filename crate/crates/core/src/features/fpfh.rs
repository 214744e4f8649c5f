use std::collections::BTreeSet;

use rayon::prelude::*;

use super::pair::ordered_pair;
use super::{check_radius, normalize_l1, to_f32, FeatureKind, FeatureSet, Surface};
use crate::cloud::{Neighbor, PointCloud};
use crate::error::Result;
use crate::keypoints::KeypointSet;

/// Bins per angle; the descriptor concatenates three such histograms.
pub const FPFH_BINS: usize = 11;
const FPFH_DIM: usize = 3 * FPFH_BINS;

/// Neighbors of `i` excluding `i` itself and points coinciding with it.
fn ring(surface: &Surface, i: usize, radius: f64) -> Vec<Neighbor> {
    surface.neighbors(i, radius).into_iter().filter(|n| n.index != i && n.distance > 0.0).collect()
}

/// Simplified PFH: three marginal histograms over the pairs `(p, neighbor)`,
/// each scaled to unit sum. `None` when no pair has a valid frame.
fn spfh(surface: &Surface, i: usize, ring: &[Neighbor]) -> Option<[f64; FPFH_DIM]> {
    let (pi, ni) = (surface.position(i), surface.normal(i));
    let mut h = [0.0; FPFH_DIM];
    let mut pairs = 0usize;
    for n in ring {
        let Ok((f, _)) = ordered_pair(&pi, &ni, &surface.position(n.index), &surface.normal(n.index)) else {
            continue;
        };
        let [a, p, t] = f.bins(FPFH_BINS);
        h[a] += 1.0;
        h[FPFH_BINS + p] += 1.0;
        h[2 * FPFH_BINS + t] += 1.0;
        pairs += 1;
    }
    if pairs == 0 {
        return None;
    }
    let s = 1.0 / pairs as f64;
    h.iter_mut().for_each(|v| *v *= s);
    Some(h)
}

/// Fast Point Feature Histogram.
///
/// `FPFH(p) = SPFH(p) + (1/k) * sum_i SPFH(p_i) / d(p, p_i)` over the `k`
/// support neighbors, with each of the three sub-histograms normalized to
/// unit sum.
pub fn compute_fpfh(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Result<FeatureSet> {
    check_radius(radius)?;
    let surface = Surface::new(cloud)?;

    let anchors: Vec<Option<(usize, Vec<Neighbor>)>> = keypoints
        .keypoints
        .par_iter()
        .map(|kp| {
            let a = surface.anchor(kp, radius)?;
            let r = ring(&surface, a, radius);
            (!r.is_empty()).then_some((a, r))
        })
        .collect();

    // SPFH of every anchor and every anchor neighbor, computed once
    let needed: BTreeSet<usize> =
        anchors.iter().flatten().flat_map(|(a, r)| std::iter::once(*a).chain(r.iter().map(|n| n.index))).collect();
    let needed: Vec<usize> = needed.into_iter().collect();
    let table: Vec<Option<[f64; FPFH_DIM]>> =
        needed.par_iter().map(|&i| spfh(&surface, i, &ring(&surface, i, radius))).collect();
    let lookup = |i: usize| needed.binary_search(&i).ok().and_then(|slot| table[slot].as_ref());

    let results: Vec<Option<Vec<f32>>> = anchors
        .par_iter()
        .map(|entry| {
            let (a, r) = entry.as_ref()?;
            let mut h = lookup(*a).copied().unwrap_or([0.0; FPFH_DIM]);
            let k = r.len() as f64;
            for n in r {
                if let Some(s) = lookup(n.index) {
                    let w = 1.0 / (k * n.distance);
                    h.iter_mut().zip(s).for_each(|(acc, v)| *acc += w * v);
                }
            }
            let mut ok = true;
            for chunk in h.chunks_mut(FPFH_BINS) {
                ok &= normalize_l1(chunk);
            }
            ok.then(|| to_f32(&h))
        })
        .collect();
    Ok(FeatureSet::from_results(FeatureKind::Fpfh, "", results))
}
