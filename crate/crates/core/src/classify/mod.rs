//! Classifiers over fixed-length descriptors: k-nearest neighbors and a
//! one-vs-one SVM trained by SMO, plus evaluation.

mod eval;
mod kernel;
mod knn;
mod svm;

pub use eval::{evaluate, EvaluationReport};
pub use kernel::{chi_square_distance, chi_square_kernel, Gamma, Kernel, KernelSpec};
pub use knn::{knn_classify, Distance, KnnModel, DEFAULT_KNN_K};
pub use svm::{kkt_violation, smo, svm_classify, svm_train, BinaryMachine, SmoSolution, SvmModel, SvmParams};

use std::path::Path;

use crate::codec::{self, Reader, Writer};
use crate::error::{Error, Result};

/// Descriptors with class ids into `classes`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub classes: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(classes: Vec<String>, vectors: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: vectors.len(), found: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::InvalidParameter(format!("label id {bad} outside {} classes", classes.len())));
        }
        if let Some(first) = vectors.first() {
            if let Some(v) = vectors.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), found: v.len() });
            }
        }
        Ok(LabeledDataset { classes, vectors, labels })
    }

    /// Class set = the sorted distinct names.
    pub fn from_names<S: AsRef<str>>(vectors: Vec<Vec<f64>>, names: &[S]) -> Result<Self> {
        let mut classes: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        let labels = names.iter().map(|s| classes.iter().position(|c| c == s.as_ref()).expect("listed")).collect();
        Self::new(classes, vectors, labels)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Argmax class id plus the per-class scores it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Knn(KnnModel),
    Svm(SvmModel),
}

const MODEL_MAGIC: &[u8; 4] = b"SLCM";
const MODEL_VERSION: u16 = 1;

impl Classifier {
    pub fn classes(&self) -> &[String] {
        match self {
            Classifier::Knn(m) => &m.data.classes,
            Classifier::Svm(m) => &m.classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.data.dim(),
            Classifier::Svm(m) => m.dim(),
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            Classifier::Knn(m) => m.classify(x),
            Classifier::Svm(m) => m.classify(x),
        }
    }

    /// Versioned container: magic `SLCM`, version, class list, then either
    /// the kNN training set or the SVM kernel, support vectors and machines.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MODEL_MAGIC, MODEL_VERSION);
        let classes = self.classes();
        w.len(classes.len());
        for c in classes {
            w.str(c);
        }
        let write_rows = |w: &mut Writer, rows: &[Vec<f64>]| {
            w.len(rows.len());
            w.u64(rows.first().map_or(0, Vec::len) as u64);
            for v in rows.iter().flatten() {
                w.f64(*v);
            }
        };
        match self {
            Classifier::Knn(m) => {
                w.u8(0);
                w.u64(m.k as u64);
                w.u8(match m.distance {
                    Distance::Euclidean => 0,
                    Distance::ChiSquare => 1,
                });
                write_rows(&mut w, &m.data.vectors);
                for &l in &m.data.labels {
                    w.u64(l as u64);
                }
            }
            Classifier::Svm(m) => {
                w.u8(1);
                match m.kernel {
                    Kernel::Linear => {
                        w.u8(0);
                        w.f64(0.0);
                    }
                    Kernel::ChiSquare { gamma } => {
                        w.u8(1);
                        w.f64(gamma);
                    }
                }
                w.f64(m.c);
                write_rows(&mut w, &m.support_vectors);
                w.len(m.machines.len());
                for mach in &m.machines {
                    w.u64(mach.positive as u64);
                    w.u64(mach.negative as u64);
                    w.f64(mach.bias);
                    w.len(mach.support.len());
                    for (&s, &c) in mach.support.iter().zip(&mach.coef) {
                        w.u64(s as u64);
                        w.f64(c);
                    }
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, MODEL_MAGIC)?;
        if version != MODEL_VERSION {
            return Err(Error::Container(format!("unsupported model version {version}")));
        }
        let n_classes = r.len()?;
        let classes = (0..n_classes).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let read_rows = |r: &mut Reader| -> Result<Vec<Vec<f64>>> {
            let (n, dim) = (r.len()?, r.u64()? as usize);
            (0..n).map(|_| (0..dim).map(|_| r.f64()).collect()).collect()
        };
        let check_class = |c: usize| {
            if c < n_classes {
                Ok(c)
            } else {
                Err(Error::Container(format!("class id {c} out of range")))
            }
        };
        let model = match r.u8()? {
            0 => {
                let k = r.u64()? as usize;
                let distance = match r.u8()? {
                    0 => Distance::Euclidean,
                    1 => Distance::ChiSquare,
                    t => return Err(Error::Container(format!("unknown distance tag {t}"))),
                };
                let vectors = read_rows(&mut r)?;
                let labels = (0..vectors.len()).map(|_| check_class(r.u64()? as usize)).collect::<Result<Vec<_>>>()?;
                let data = LabeledDataset::new(classes, vectors, labels)?;
                Classifier::Knn(KnnModel::new(data, k, distance)?)
            }
            1 => {
                let kernel = match (r.u8()?, r.f64()?) {
                    (0, _) => Kernel::Linear,
                    (1, gamma) => Kernel::ChiSquare { gamma },
                    (t, _) => return Err(Error::Container(format!("unknown kernel tag {t}"))),
                };
                let c = r.f64()?;
                let support_vectors = read_rows(&mut r)?;
                let n_machines = r.len()?;
                let mut machines = Vec::with_capacity(n_machines.min(bytes.len()));
                for _ in 0..n_machines {
                    let positive = check_class(r.u64()? as usize)?;
                    let negative = check_class(r.u64()? as usize)?;
                    let bias = r.f64()?;
                    let n_sv = r.len()?;
                    let (mut support, mut coef) = (Vec::new(), Vec::new());
                    for _ in 0..n_sv {
                        let s = r.u64()? as usize;
                        if s >= support_vectors.len() {
                            return Err(Error::Container(format!("support vector {s} out of range")));
                        }
                        support.push(s);
                        coef.push(r.f64()?);
                    }
                    machines.push(BinaryMachine { positive, negative, support, coef, bias });
                }
                Classifier::Svm(SvmModel { classes, kernel, c, support_vectors, machines })
            }
            t => return Err(Error::Container(format!("unknown classifier tag {t}"))),
        };
        r.finish()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}
