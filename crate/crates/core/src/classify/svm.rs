use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, KernelSpec};
use super::{LabeledDataset, Prediction};
use crate::error::{Error, Result};

/// Replaces a non-positive curvature along the update direction.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelSpec,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iters: usize,
    /// Kernel rows kept per binary problem.
    pub cache_rows: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, kernel: KernelSpec::default(), tol: 1e-3, max_iters: 1_000_000, cache_rows: 2048 }
    }
}

/// One binary machine separating `positive` (+1) from `negative` (-1).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    /// Indices into [`SvmModel::support_vectors`].
    pub support: Vec<usize>,
    /// `alpha_i * y_i`, parallel to `support`.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    pub fn decision(&self, kernel: &Kernel, support_vectors: &[Vec<f64>], x: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(&s, &c)| c * kernel.eval(&support_vectors[s], x)).sum::<f64>()
            + self.bias
    }
}

/// One-vs-one soft-margin SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<String>,
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub machines: Vec<BinaryMachine>,
}

/// Outcome of one SMO run, kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective `sum(alpha) - 1/2 alpha^T Q alpha` after each step, starting at 0.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// LRU cache of kernel rows over the problem's own indices.
struct RowCache<'a> {
    kernel: Kernel,
    x: Vec<&'a [f64]>,
    capacity: usize,
    rows: HashMap<usize, (Vec<f64>, u64)>,
    clock: u64,
}

impl<'a> RowCache<'a> {
    fn new(kernel: Kernel, x: Vec<&'a [f64]>, capacity: usize) -> Self {
        RowCache { kernel, x, capacity: capacity.max(2), rows: HashMap::new(), clock: 0 }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        let now = self.clock;
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                let oldest = *self.rows.iter().min_by_key(|(_, (_, t))| *t).map(|(k, _)| k).expect("non-empty cache");
                self.rows.remove(&oldest);
            }
            let xi = self.x[i];
            let row = self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
            self.rows.insert(i, (row, now));
        }
        let entry = self.rows.get_mut(&i).expect("row just inserted");
        entry.1 = now;
        &entry.0
    }
}

/// SMO on the binary dual `max sum(a) - 1/2 sum a_i a_j y_i y_j K_ij`
/// subject to `0 <= a_i <= c` and `sum a_i y_i = 0`.
///
/// Each step optimizes the maximal violating pair: `i` maximizes and `j`
/// minimizes `-y_t grad_t` over the indices free to move up and down
/// respectively, which also maximizes the error gap between them. Stops once
/// that gap falls below `tol`, which bounds every KKT violation by `tol`.
pub fn smo(x: &[&[f64]], y: &[f64], kernel: Kernel, params: &SvmParams) -> Result<SmoSolution> {
    let n = x.len();
    if n != y.len() || n == 0 {
        return Err(Error::InvalidParameter("SMO needs equal, non-zero numbers of points and labels".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", params.tol)));
    }
    let c = params.c;
    let mut cache = RowCache::new(kernel, x.to_vec(), params.cache_rows);
    let diag: Vec<f64> = x.iter().map(|xi| kernel.eval(xi, xi)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of the minimization form 1/2 a^T Q a - sum(a)
    let mut grad = vec![-1.0; n];
    let mut objective = vec![0.0];
    let up = |a: f64, yt: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yt: f64| if yt > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > g_max {
                (i, g_max) = (t, v);
            }
            if low(alpha[t], y[t]) && v < g_min {
                (j, g_min) = (t, v);
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            converged = true;
            break;
        }

        let k_ij = cache.row(i)[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] - 2.0 * k_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * k_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let row_i = cache.row(i).to_vec();
        let row_j = cache.row(j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
        iterations += 1;
        objective.push(-0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>());
    }

    if alpha.iter().chain(&grad).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SMO diverged".into()));
    }
    Ok(SmoSolution { bias: bias(&alpha, &grad, y, c), alpha, objective, iterations, converged })
}

/// Offset from the free support vectors, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    -rho
}

/// Largest KKT violation of a binary solution, measured on `y_i f(x_i) - 1`.
pub fn kkt_violation(x: &[&[f64]], y: &[f64], kernel: &Kernel, sol: &SmoSolution, c: f64) -> f64 {
    (0..x.len())
        .map(|i| {
            let f: f64 = (0..x.len()).map(|j| sol.alpha[j] * y[j] * kernel.eval(x[j], x[i])).sum::<f64>() + sol.bias;
            let m = y[i] * f - 1.0;
            if sol.alpha[i] <= 0.0 {
                (-m).max(0.0)
            } else if sol.alpha[i] >= c {
                m.max(0.0)
            } else {
                m.abs()
            }
        })
        .fold(0.0, f64::max)
}

impl SvmModel {
    /// Trains one machine per unordered class pair (in parallel; each problem
    /// has its own kernel cache).
    pub fn train(data: &LabeledDataset, params: &SvmParams) -> Result<Self> {
        let present: Vec<usize> = (0..data.classes.len()).filter(|&c| data.labels.contains(&c)).collect();
        if present.len() < 2 {
            return Err(Error::InsufficientData("SVM training needs at least two classes".into()));
        }
        if !(params.c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", params.c)));
        }
        let kernel = params.kernel.resolve(&data.vectors)?;
        let pairs: Vec<(usize, usize)> =
            present.iter().enumerate().flat_map(|(a, &p)| present[a + 1..].iter().map(move |&q| (p, q))).collect();

        let solved: Vec<(usize, usize, Vec<usize>, SmoSolution)> = pairs
            .par_iter()
            .map(|&(p, q)| {
                let members: Vec<usize> =
                    (0..data.len()).filter(|&i| data.labels[i] == p || data.labels[i] == q).collect();
                let x: Vec<&[f64]> = members.iter().map(|&i| data.vectors[i].as_slice()).collect();
                let y: Vec<f64> = members.iter().map(|&i| if data.labels[i] == p { 1.0 } else { -1.0 }).collect();
                let sol = smo(&x, &y, kernel, params)?;
                if !sol.converged {
                    log::warn!("SMO for classes {p} vs {q} stopped after {} iterations", sol.iterations);
                }
                Ok((p, q, members, sol))
            })
            .collect::<Result<_>>()?;

        // shared table of support vectors, in training order
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut used: Vec<usize> = solved
            .iter()
            .flat_map(|(_, _, members, sol)| members.iter().zip(&sol.alpha).filter(|(_, &a)| a > 0.0).map(|(&i, _)| i))
            .collect();
        used.sort_unstable();
        used.dedup();
        for (s, &i) in used.iter().enumerate() {
            slot.insert(i, s);
        }
        let machines = solved
            .into_iter()
            .map(|(p, q, members, sol)| {
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (t, &i) in members.iter().enumerate() {
                    if sol.alpha[t] > 0.0 {
                        support.push(slot[&i]);
                        coef.push(sol.alpha[t] * if data.labels[i] == p { 1.0 } else { -1.0 });
                    }
                }
                BinaryMachine { positive: p, negative: q, support, coef, bias: sol.bias }
            })
            .collect();
        Ok(SvmModel {
            classes: data.classes.clone(),
            kernel,
            c: params.c,
            support_vectors: used.iter().map(|&i| data.vectors[i].clone()).collect(),
            machines,
        })
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// One-vs-one vote. Ties on votes go to the class with the largest summed
    /// absolute decision value over the machines it won, then to the lower
    /// class index. Scores are the vote counts.
    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        if self.machines.is_empty() {
            return Err(Error::InvalidParameter("SVM model has no trained machines".into()));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let mut votes = vec![0.0; self.classes.len()];
        let mut margin = vec![0.0; self.classes.len()];
        for m in &self.machines {
            let f = m.decision(&self.kernel, &self.support_vectors, x);
            let winner = if f > 0.0 { m.positive } else { m.negative };
            votes[winner] += 1.0;
            margin[winner] += f.abs();
        }
        let mut label = 0;
        for c in 1..votes.len() {
            if votes[c] > votes[label] || (votes[c] == votes[label] && margin[c] > margin[label]) {
                label = c;
            }
        }
        Ok(Prediction { label, scores: votes })
    }
}

pub fn svm_train(data: &LabeledDataset, params: &SvmParams) -> Result<SvmModel> {
    SvmModel::train(data, params)
}

pub fn svm_classify(model: &SvmModel, x: &[f64]) -> Result<Prediction> {
    model.classify(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::kernel::Gamma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            x.push(vec![s * gap + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(s);
        }
        (x, y)
    }

    #[test]
    fn two_points_become_support_vectors() {
        let d = LabeledDataset::from_names(vec![vec![0.0, 1.0], vec![1.0, 0.0]], &["a", "b"]).unwrap();
        let params = SvmParams { kernel: KernelSpec::ChiSquare(Gamma::Fixed(1.0)), ..SvmParams::default() };
        let m = SvmModel::train(&d, &params).unwrap();
        assert_eq!(m.support_vectors.len(), 2);
        assert_eq!(m.classify(&[0.0, 1.0]).unwrap().label, 0);
        assert_eq!(m.classify(&[1.0, 0.0]).unwrap().label, 1);
        assert_eq!(m.classify(&[0.1, 0.9]).unwrap().scores, vec![1.0, 0.0]);
    }

    #[test]
    fn separable_blobs_meet_kkt() {
        let (x, y) = blobs(3, 80, 2.5);
        let xs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let params = SvmParams { c: 10.0, kernel: KernelSpec::Linear, ..SvmParams::default() };
        let sol = smo(&xs, &y, Kernel::Linear, &params).unwrap();
        assert!(sol.converged);
        assert!(sol.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
        assert!(kkt_violation(&xs, &y, &Kernel::Linear, &sol, params.c) <= params.tol);
        for w in sol.objective.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = LabeledDataset::from_names(vec![vec![0.0], vec![1.0]], &["a", "a"]).unwrap();
        assert!(SvmModel::train(&d, &SvmParams::default()).is_err());
        let two = LabeledDataset::from_names(vec![vec![0.0], vec![1.0]], &["a", "b"]).unwrap();
        assert!(SvmModel::train(&two, &SvmParams { c: 0.0, ..SvmParams::default() }).is_err());
    }

    #[test]
    fn three_classes_vote() {
        let mut v = Vec::new();
        let mut l = Vec::new();
        for (name, center) in [("a", [0.8, 0.1, 0.1]), ("b", [0.1, 0.8, 0.1]), ("c", [0.1, 0.1, 0.8])] {
            for s in 0..6 {
                let e = 0.02 * s as f64;
                v.push(vec![center[0] - e, center[1] + e, center[2]]);
                l.push(name);
            }
        }
        let d = LabeledDataset::from_names(v, &l).unwrap();
        let m = SvmModel::train(&d, &SvmParams::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        for (x, &lab) in d.vectors.iter().zip(&d.labels) {
            assert_eq!(m.classify(x).unwrap().label, lab);
        }
    }
}
