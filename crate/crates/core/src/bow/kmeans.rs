use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams { k, seed, max_iters: 100, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k * dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Inertia after every assignment step, first to last.
    pub inertia_history: Vec<f64>,
    /// Lloyd updates performed.
    pub iterations: usize,
    /// True when the final assignment equals the one the centroids were computed from.
    pub converged: bool,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and its squared distance; ties go to the lower index.
fn nearest(row: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(data: &[f64], dim: usize, centroids: &[f64]) -> (Vec<usize>, Vec<f64>) {
    data.par_chunks_exact(dim).map(|row| nearest(row, centroids, dim)).unzip()
}

/// k-means++ seeding: first center uniform, then each next one drawn with
/// probability proportional to the squared distance to the closest chosen center.
fn seed_centroids(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let first = rng.random_range(0..n);
    let mut centroids = row(first).to_vec();
    let mut closest: Vec<f64> = (0..n).map(|i| squared_distance(row(i), row(first))).collect();
    while centroids.len() < k * dim {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // fewer distinct rows than k; duplicates are unavoidable
            rng.random_range(0..n)
        };
        centroids.extend_from_slice(row(pick));
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(squared_distance(row(i), row(pick)));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding over `n = data.len() / dim` rows.
///
/// The update step runs sequentially in row order, so the result is
/// bit-identical for any thread count. A cluster that loses all its rows is
/// reseeded with the row currently farthest from its centroid.
pub fn kmeans(data: &[f64], dim: usize, params: &KMeansParams) -> Result<KMeansResult> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::InvalidParameter(format!(
            "data length {} is not a multiple of dimension {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InsufficientData(format!("k = {k} exceeds the {n} available features")));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {}", params.tol)));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = seed_centroids(data, dim, k, &mut rng);
    let (mut assignments, mut dist) = assign(data, dim, &centroids);
    let mut history = vec![dist.iter().sum::<f64>()];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iters {
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            sums[a * dim..(a + 1) * dim].iter_mut().zip(&data[i * dim..(i + 1) * dim]).for_each(|(s, v)| *s += v);
        }
        let mut next = centroids.clone();
        let mut taken = vec![false; n];
        for j in 0..k {
            let c = &mut next[j * dim..(j + 1) * dim];
            if counts[j] > 0 {
                let inv = counts[j] as f64;
                c.iter_mut().zip(&sums[j * dim..(j + 1) * dim]).for_each(|(c, s)| *c = s / inv);
            } else {
                // farthest row not already used to reseed; ties to the lower index
                let far = (0..n).filter(|&i| !taken[i]).fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
                if let Some(i) = far {
                    taken[i] = true;
                    c.copy_from_slice(&data[i * dim..(i + 1) * dim]);
                }
            }
        }
        let movement = next
            .chunks_exact(dim)
            .zip(centroids.chunks_exact(dim))
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;

        let (fresh, fresh_dist) = assign(data, dim, &centroids);
        history.push(fresh_dist.iter().sum());
        let stable = fresh == assignments;
        assignments = fresh;
        dist = fresh_dist;
        if stable {
            converged = true;
            break;
        }
        if movement < params.tol {
            break;
        }
    }
    Ok(KMeansResult { centroids, assignments, inertia_history: history, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(seed: u64, per: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        for c in [[0.0, 0.0], [5.0, 5.0], [0.0, 6.0]] {
            for _ in 0..per {
                data.push(c[0] + rng.random_range(-1.0..1.0));
                data.push(c[1] + rng.random_range(-1.0..1.0));
            }
        }
        data
    }

    #[test]
    fn exact_cover_has_zero_inertia() {
        let data = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0, 3.0];
        let r = kmeans(&data, 2, &KMeansParams::new(4, 7)).unwrap();
        assert_eq!(r.inertia(), 0.0);
        let mut words: Vec<[u64; 2]> = r.centroids.chunks(2).map(|c| [c[0].to_bits(), c[1].to_bits()]).collect();
        let mut want: Vec<[u64; 2]> = data.chunks(2).map(|c| [c[0].to_bits(), c[1].to_bits()]).collect();
        words.sort();
        want.sort();
        assert_eq!(words, want);
    }

    #[test]
    fn single_word_is_the_global_mean() {
        let data = blobs(1, 20);
        let r = kmeans(&data, 2, &KMeansParams::new(1, 3)).unwrap();
        let n = data.len() as f64 / 2.0;
        let mx: f64 = data.iter().step_by(2).sum::<f64>() / n;
        let my: f64 = data.iter().skip(1).step_by(2).sum::<f64>() / n;
        assert!((r.centroids[0] - mx).abs() < 1e-12 && (r.centroids[1] - my).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn too_few_features_is_an_error() {
        assert!(matches!(kmeans(&[1.0, 2.0], 1, &KMeansParams::new(3, 0)), Err(Error::InsufficientData(_))));
        assert!(kmeans(&[1.0, 2.0], 1, &KMeansParams::new(0, 0)).is_err());
    }

    #[test]
    fn duplicate_rows_keep_k_words() {
        let data = vec![1.0; 10];
        let r = kmeans(&data, 1, &KMeansParams::new(3, 5)).unwrap();
        assert_eq!(r.centroids.len(), 3);
        assert_eq!(r.inertia(), 0.0);
    }

    #[test]
    fn converged_words_are_cluster_means() {
        let data = blobs(2, 40);
        let r = kmeans(&data, 2, &KMeansParams { tol: 0.0, ..KMeansParams::new(3, 11) }).unwrap();
        assert!(r.converged);
        for j in 0..3 {
            let members: Vec<&[f64]> =
                data.chunks(2).zip(&r.assignments).filter(|(_, &a)| a == j).map(|(row, _)| row).collect();
            assert!(!members.is_empty());
            for d in 0..2 {
                let mean = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                assert!((r.centroids[j * 2 + d] - mean).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..1000, k in 1usize..8) {
            let data = blobs(seed, 15);
            let r = kmeans(&data, 2, &KMeansParams::new(k, seed)).unwrap();
            for w in r.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0], "{:?}", r.inertia_history);
            }
        }

        #[test]
        fn same_seed_same_result(seed in 0u64..1000) {
            let data = blobs(seed, 10);
            let p = KMeansParams::new(4, seed);
            prop_assert_eq!(kmeans(&data, 2, &p).unwrap(), kmeans(&data, 2, &p).unwrap());
        }
    }
}
