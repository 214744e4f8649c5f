use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.iter().chain(y).any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("chi-square inputs must be non-negative".into()));
    }
    Ok(())
}

/// `sum_i (x_i - y_i)^2 / (x_i + y_i)`, skipping terms where `x_i + y_i = 0`.
pub fn chi_square_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(chi2(x, y))
}

/// `exp(-gamma * chi2(x, y))`.
pub fn chi_square_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    check_pair(x, y)?;
    Ok((-gamma * chi2(x, y)).exp())
}

pub(crate) fn chi2(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let s = a + b;
            if s > 0.0 {
                (a - b) * (a - b) / s
            } else {
                0.0
            }
        })
        .sum()
}

pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// A fully resolved kernel, as stored in a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    ChiSquare { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Kernel::ChiSquare { gamma } => (-gamma * chi2(x, y)).exp(),
        }
    }
}

/// How the chi-square kernel width is chosen at training time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    Fixed(f64),
    /// `1 / dimension`.
    InverseDimension,
    /// `1 / mean chi2` over all training pairs.
    InverseMeanDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    Linear,
    ChiSquare(Gamma),
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::ChiSquare(Gamma::InverseDimension)
    }
}

impl KernelSpec {
    pub(crate) fn resolve(&self, vectors: &[Vec<f64>]) -> Result<Kernel> {
        let KernelSpec::ChiSquare(rule) = *self else {
            return Ok(Kernel::Linear);
        };
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite descriptor value".into()));
        }
        if vectors.iter().flatten().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("chi-square kernel needs non-negative descriptors".into()));
        }
        let gamma = match rule {
            Gamma::Fixed(g) => g,
            Gamma::InverseDimension => 1.0 / vectors.first().map_or(1, Vec::len).max(1) as f64,
            Gamma::InverseMeanDistance => {
                let (mut sum, mut pairs) = (0.0, 0usize);
                for (i, a) in vectors.iter().enumerate() {
                    for b in &vectors[i + 1..] {
                        sum += chi2(a, b);
                        pairs += 1;
                    }
                }
                if sum > 0.0 {
                    pairs as f64 / sum
                } else {
                    1.0
                }
            }
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Kernel::ChiSquare { gamma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert_eq!(chi_square_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(chi_square_distance(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        let k = chi_square_kernel(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((k - 0.13534).abs() < 1e-5);
        assert_eq!(chi_square_kernel(&[0.2, 0.8], &[0.2, 0.8], 3.0).unwrap(), 1.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(chi_square_distance(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(chi_square_distance(&[-1.0], &[1.0]).is_err());
        assert!(chi_square_kernel(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn gamma_rules() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(
            KernelSpec::ChiSquare(Gamma::InverseDimension).resolve(&v).unwrap(),
            Kernel::ChiSquare { gamma: 0.5 }
        );
        // pair distances 2, 2/3, 2/3
        let Kernel::ChiSquare { gamma } = KernelSpec::ChiSquare(Gamma::InverseMeanDistance).resolve(&v).unwrap() else {
            panic!()
        };
        assert!((gamma - 3.0 / (2.0 + 4.0 / 3.0)).abs() < 1e-12);
        assert!(KernelSpec::ChiSquare(Gamma::Fixed(-1.0)).resolve(&v).is_err());
    }

    fn histogram(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter().map(|x| x / s).collect()
            } else {
                v
            }
        })
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_and_bounded(x in histogram(12), y in histogram(12), g in 0.01f64..10.0) {
            let a = chi_square_kernel(&x, &y, g).unwrap();
            prop_assert_eq!(a, chi_square_kernel(&y, &x, g).unwrap());
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert_eq!(chi_square_kernel(&x, &x, g).unwrap(), 1.0);
        }
    }
}
