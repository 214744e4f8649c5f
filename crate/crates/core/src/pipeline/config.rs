//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! detector = harris3d
//! feature = pfhrgb
//! k = 200
//! classifier = svm
//!
//! [training]
//! clouds/kitchen_01.pcd<TAB>kitchen
//! [test]
//! clouds/kitchen_07.pcd<TAB>kitchen
//! ```
//!
//! Keys (all optional):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `detector` | `uniform_sampling` | `uniform_sampling` or `harris3d` |
//! | `us_radius` | 0.03 | Uniform Sampling voxel edge (m) |
//! | `harris_support_radius` | 0.05 | Harris3D normal-covariance support (m) |
//! | `harris_nms_radius` | 0.05 | Harris3D suppression radius (m) |
//! | `harris_threshold` | 0.01 | fraction of the cloud's maximum response |
//! | `harris_response_constant` | 0.04 | Harris `k` |
//! | `normal_radius` | 0.05 | normal-estimation radius (m) |
//! | `feature` | `fpfh` | `pfh`, `pfhrgb`, `fpfh`, `shot`, `cshot` or `esf` |
//! | `feature_radius` | per feature | 0.06 for the PFH family, 0.10 for SHOT |
//! | `k` | 50 | dictionary size |
//! | `seed` | 0 | k-means and ESF seed |
//! | `kmeans_max_iters` | 100 | Lloyd iteration cap |
//! | `kmeans_tol` | 1e-4 | centroid-movement stop |
//! | `dictionary_max_features` | all | cluster a seeded subset of at most this many features |
//! | `classifier` | `svm` | `svm` or `knn` |
//! | `svm_c` | 1 | soft-margin penalty |
//! | `svm_kernel` | `chi_square` | `chi_square` or `linear` |
//! | `svm_gamma` | `inverse_dimension` | a number, `inverse_dimension` or `inverse_mean` |
//! | `svm_tol` | 1e-3 | SMO stopping tolerance |
//! | `knn_k` | 7 | neighbors voting |
//! | `knn_distance` | `euclidean` | `euclidean` or `chi_square` |
//! | `esf_samples` | 20000 | ESF random triples |
//! | `esf_voxel_resolution` | 64 | ESF grid cells per axis |
//! | `cache_dir` | none | feature cache directory |
//!
//! Relative paths resolve against the configuration file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::bow::DictionaryParams;
use crate::classify::{Distance, Gamma, KernelSpec, SvmParams, DEFAULT_KNN_K};
use crate::error::{Error, Result};
use crate::features::{EsfParams, FeatureKind};
use crate::keypoints::{HarrisConfig, DEFAULT_US_RADIUS};

/// Normal-estimation radius used before detection and description.
pub const DEFAULT_NORMAL_RADIUS: f64 = 0.05;
pub const DEFAULT_DICTIONARY_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    UniformSampling,
    Harris3d,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 2] = [DetectorKind::UniformSampling, DetectorKind::Harris3d];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::UniformSampling => "uniform_sampling",
            DetectorKind::Harris3d => "harris3d",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform_sampling" | "us" => Ok(DetectorKind::UniformSampling),
            "harris3d" | "harris" => Ok(DetectorKind::Harris3d),
            _ => Err(Error::Config(format!("unknown detector `{s}`; supported: uniform_sampling, harris3d"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Svm,
    Knn,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            _ => Err(Error::Config(format!("unknown classifier `{s}`; supported: svm, knn"))),
        }
    }
}

/// One labeled cloud file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudEntry {
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub training: Vec<CloudEntry>,
    pub test: Vec<CloudEntry>,
    pub normal_radius: f64,
    pub detector: DetectorKind,
    pub us_radius: f64,
    pub harris: HarrisConfig,
    pub feature: FeatureKind,
    /// `None` selects the feature's default radius.
    pub feature_radius: Option<f64>,
    pub dictionary: DictionaryParams,
    pub classifier: ClassifierKind,
    pub svm: SvmParams,
    pub knn_k: usize,
    pub knn_distance: Distance,
    pub esf: EsfParams,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            training: Vec::new(),
            test: Vec::new(),
            normal_radius: DEFAULT_NORMAL_RADIUS,
            detector: DetectorKind::UniformSampling,
            us_radius: DEFAULT_US_RADIUS,
            harris: HarrisConfig::default(),
            feature: FeatureKind::Fpfh,
            feature_radius: None,
            dictionary: DictionaryParams::new(DEFAULT_DICTIONARY_SIZE, 0),
            classifier: ClassifierKind::Svm,
            svm: SvmParams::default(),
            knn_k: DEFAULT_KNN_K,
            knn_distance: Distance::Euclidean,
            esf: EsfParams::default(),
            cache_dir: None,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {value}")))
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    let v: i64 = number(key, value)?;
    if v > 0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("`{key}` must be a positive integer, got {value}")))
    }
}

impl ExperimentConfig {
    /// Reads a configuration file and resolves its cloud paths. Every listed cloud must exist.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let config = Self::parse(&text, base)?;
        for entry in config.training.iter().chain(&config.test) {
            if !entry.path.is_file() {
                return Err(Error::Config(format!("listed cloud {} does not exist", entry.path.display())));
            }
        }
        Ok(config)
    }

    /// Parses configuration text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            Settings,
            Training,
            Test,
        }
        let mut c = ExperimentConfig::default();
        let mut section = Section::Settings;
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", n + 1));
            match line {
                "[training]" => {
                    section = Section::Training;
                    continue;
                }
                "[test]" => {
                    section = Section::Test;
                    continue;
                }
                _ if line.starts_with('[') => return Err(at(format!("unknown section {line}"))),
                _ => {}
            }
            if section != Section::Settings {
                let trimmed = raw.trim_end_matches(['\r', '\n']).trim_start();
                let (path, label) = match trimmed.rsplit_once('\t') {
                    Some((p, l)) => (p.trim(), l.trim()),
                    None => {
                        let parts: Vec<&str> = trimmed.split_whitespace().collect();
                        match parts.as_slice() {
                            [p, l] => (*p, *l),
                            _ => return Err(at(format!("expected `path<TAB>label`, got `{trimmed}`"))),
                        }
                    }
                };
                if path.is_empty() || label.is_empty() {
                    return Err(at(format!("expected `path<TAB>label`, got `{trimmed}`")));
                }
                let entry = CloudEntry { path: resolve(path), label: label.to_string() };
                if section == Section::Training {
                    c.training.push(entry);
                } else {
                    c.test.push(entry);
                }
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            c.set(key, value, &resolve).map_err(|e| at(e.to_string()))?;
        }
        Ok(c)
    }

    fn set(&mut self, key: &str, value: &str, resolve: &dyn Fn(&str) -> PathBuf) -> Result<()> {
        match key {
            "detector" => self.detector = value.parse()?,
            "us_radius" => self.us_radius = positive(key, value)?,
            "harris_support_radius" => self.harris.support_radius = positive(key, value)?,
            "harris_nms_radius" => self.harris.nms_radius = positive(key, value)?,
            "harris_threshold" => {
                self.harris.threshold = number(key, value)?;
                if !(self.harris.threshold >= 0.0) {
                    return Err(Error::Config(format!("`{key}` must be non-negative")));
                }
            }
            "harris_response_constant" => self.harris.response_constant = number(key, value)?,
            "normal_radius" => self.normal_radius = positive(key, value)?,
            "feature" => self.feature = value.parse()?,
            "feature_radius" => self.feature_radius = Some(positive(key, value)?),
            "k" => self.dictionary.kmeans.k = count(key, value)?,
            "seed" => {
                let seed = number(key, value)?;
                self.set_seed(seed);
            }
            "kmeans_max_iters" => self.dictionary.kmeans.max_iters = count(key, value)?,
            "kmeans_tol" => {
                self.dictionary.kmeans.tol = number(key, value)?;
                if !(self.dictionary.kmeans.tol >= 0.0) {
                    return Err(Error::Config(format!("`{key}` must be non-negative")));
                }
            }
            "dictionary_max_features" => self.dictionary.max_features = Some(count(key, value)?),
            "classifier" => self.classifier = value.parse()?,
            "svm_c" => self.svm.c = positive(key, value)?,
            "svm_kernel" => {
                let gamma = match self.svm.kernel {
                    KernelSpec::ChiSquare(g) => g,
                    KernelSpec::Linear => Gamma::InverseDimension,
                };
                self.svm.kernel = match value {
                    "chi_square" => KernelSpec::ChiSquare(gamma),
                    "linear" => KernelSpec::Linear,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown svm_kernel `{value}`; supported: chi_square, linear"
                        )))
                    }
                }
            }
            "svm_gamma" => {
                let gamma = match value {
                    "inverse_dimension" => Gamma::InverseDimension,
                    "inverse_mean" => Gamma::InverseMeanDistance,
                    v => Gamma::Fixed(positive(key, v)?),
                };
                if let KernelSpec::ChiSquare(g) = &mut self.svm.kernel {
                    *g = gamma;
                } else {
                    return Err(Error::Config("`svm_gamma` needs svm_kernel = chi_square".into()));
                }
            }
            "svm_tol" => self.svm.tol = positive(key, value)?,
            "knn_k" => self.knn_k = count(key, value)?,
            "knn_distance" => {
                self.knn_distance = match value {
                    "euclidean" => Distance::Euclidean,
                    "chi_square" => Distance::ChiSquare,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown knn_distance `{value}`; supported: euclidean, chi_square"
                        )))
                    }
                }
            }
            "esf_samples" => self.esf.samples = count(key, value)?,
            "esf_voxel_resolution" => self.esf.voxel_resolution = count(key, value)?,
            "cache_dir" => self.cache_dir = Some(resolve(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.dictionary.kmeans.seed = seed;
        self.esf.seed = seed;
    }

    pub fn seed(&self) -> u64 {
        self.dictionary.kmeans.seed
    }

    pub fn k(&self) -> usize {
        self.dictionary.kmeans.k
    }

    pub fn feature_radius(&self) -> f64 {
        self.feature_radius.unwrap_or_else(|| self.feature.default_radius())
    }

    /// Stage settings as `key = value` lines, in a fixed order.
    pub fn settings_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        kv("detector", self.detector.name().into());
        kv("us_radius", self.us_radius.to_string());
        kv("harris_support_radius", self.harris.support_radius.to_string());
        kv("harris_nms_radius", self.harris.nms_radius.to_string());
        kv("harris_threshold", self.harris.threshold.to_string());
        kv("harris_response_constant", self.harris.response_constant.to_string());
        kv("normal_radius", self.normal_radius.to_string());
        kv("feature", self.feature.name().into());
        if let Some(r) = self.feature_radius {
            kv("feature_radius", r.to_string());
        }
        kv("k", self.k().to_string());
        kv("seed", self.seed().to_string());
        kv("kmeans_max_iters", self.dictionary.kmeans.max_iters.to_string());
        kv("kmeans_tol", self.dictionary.kmeans.tol.to_string());
        if let Some(m) = self.dictionary.max_features {
            kv("dictionary_max_features", m.to_string());
        }
        kv("classifier", self.classifier.name().into());
        kv("svm_c", self.svm.c.to_string());
        match self.svm.kernel {
            KernelSpec::Linear => kv("svm_kernel", "linear".into()),
            KernelSpec::ChiSquare(g) => {
                kv("svm_kernel", "chi_square".into());
                kv(
                    "svm_gamma",
                    match g {
                        Gamma::InverseDimension => "inverse_dimension".into(),
                        Gamma::InverseMeanDistance => "inverse_mean".into(),
                        Gamma::Fixed(v) => v.to_string(),
                    },
                );
            }
        }
        kv("svm_tol", self.svm.tol.to_string());
        kv("knn_k", self.knn_k.to_string());
        kv(
            "knn_distance",
            match self.knn_distance {
                Distance::Euclidean => "euclidean".into(),
                Distance::ChiSquare => "chi_square".into(),
            },
        );
        kv("esf_samples", self.esf.samples.to_string());
        kv("esf_voxel_resolution", self.esf.voxel_resolution.to_string());
        s
    }

    /// Full configuration text; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = self.settings_text();
        if let Some(dir) = &self.cache_dir {
            writeln!(s, "cache_dir = {}", dir.display()).expect("string write");
        }
        for (name, list) in [("training", &self.training), ("test", &self.test)] {
            if !list.is_empty() {
                writeln!(s, "\n[{name}]").expect("string write");
                s.push_str(&cloud_list(list));
            }
        }
        s
    }

    /// SHA-256 of the stage settings; equal fingerprints mean identical processing.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.settings_text().as_bytes()))
    }

    /// Sorted distinct labels of the training list.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.training.iter().map(|e| e.label.clone()).collect();
        c.sort();
        c.dedup();
        c
    }
}

/// `path<TAB>label` lines.
pub fn cloud_list(entries: &[CloudEntry]) -> String {
    entries.iter().map(|e| format!("{}\t{}\n", e.path.display(), e.label)).collect()
}

/// Free-function form of [`ExperimentConfig::read`].
pub fn read_configuration(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    ExperimentConfig::read(path)
}
