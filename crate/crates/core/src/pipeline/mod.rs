//! End-to-end semantic localization driven by an experiment configuration.
//!
//! Features are extracted per cloud (optionally through an on-disk cache)
//! before the dictionary and classifier are fitted. The same system then
//! labels test clouds. Cross-validation and grid sweeps reuse these pieces,
//! and `synth` produces labeled scenes to run them on.

mod config;
mod extract;
mod report;
mod sweep;
mod synth;

pub use config::{
    cloud_list, read_configuration, ClassifierKind, CloudEntry, DetectorKind, ExperimentConfig,
    DEFAULT_DICTIONARY_SIZE, DEFAULT_NORMAL_RADIUS,
};
pub use extract::{
    extract_cloud, extract_entries, extract_entries_lenient, extract_file, extraction_key, CloudStats, ExtractionStats,
    LenientExtraction,
};
pub use report::{show_results, OutputFormat};
pub use sweep::{sweep, sweep_csv, sweep_dat, SweepGrid, SweepRow};
pub use synth::{
    desk_categories, generate_synthetic_dataset, Archetype, Primitive, SceneSpec, Shape, SyntheticDataset,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bow::{build_dictionary, BowDescriptor, Dictionary};
use crate::classify::{evaluate, Classifier, EvaluationReport, KnnModel, LabeledDataset, SvmModel};
use crate::cloud::PointCloud;
use crate::codec::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSet};

/// Length of the vectors the classifier sees: the dictionary size, or the
/// ESF length for the global descriptor.
pub fn descriptor_dim(config: &ExperimentConfig) -> usize {
    if config.feature == FeatureKind::Esf {
        FeatureKind::Esf.dimension()
    } else {
        config.k()
    }
}

/// Clusters the training features into a dictionary; `None` for ESF, which
/// needs none.
pub fn fit_dictionary(config: &ExperimentConfig, sets: &[FeatureSet]) -> Result<Option<Dictionary>> {
    if config.feature == FeatureKind::Esf {
        return Ok(None);
    }
    build_dictionary(sets, &config.dictionary).map(Some)
}

/// Turns one cloud's features into the fixed-length classifier input.
pub fn describe_features(dictionary: Option<&Dictionary>, features: &FeatureSet) -> Result<BowDescriptor> {
    match dictionary {
        Some(d) => d.describe(features),
        None if features.kind == FeatureKind::Esf => {
            if features.len() != 1 {
                return Err(Error::InvalidParameter(format!("expected one ESF row, found {}", features.len())));
            }
            Ok(BowDescriptor {
                histogram: features.row(0).iter().map(|&v| v as f64).collect(),
                empty: false,
                source: features.source.clone(),
                label: None,
            })
        }
        None => Err(Error::InvalidParameter(format!("{} features need a dictionary", features.kind))),
    }
}

/// Trains the configured classifier on labeled descriptors.
pub fn fit_classifier<S: AsRef<str>>(
    config: &ExperimentConfig,
    descriptors: &[BowDescriptor],
    labels: &[S],
) -> Result<Classifier> {
    let expected = descriptor_dim(config);
    if let Some(d) = descriptors.iter().find(|d| d.len() != expected) {
        return Err(Error::DimensionMismatch { expected, found: d.len() });
    }
    let data = LabeledDataset::from_names(descriptors.iter().map(|d| d.histogram.clone()).collect(), labels)?;
    if data.is_empty() {
        return Err(Error::InsufficientData("no training descriptors".into()));
    }
    Ok(match config.classifier {
        ClassifierKind::Svm => Classifier::Svm(SvmModel::train(&data, &config.svm)?),
        ClassifierKind::Knn => Classifier::Knn(KnnModel::new(data, config.knn_k, config.knn_distance)?),
    })
}

/// The outcome for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub label: String,
    /// Per-class scores in the classifier's class order.
    pub scores: Vec<f64>,
    /// The frame produced no features and was classified from the all-zero
    /// histogram.
    pub empty: bool,
}

/// A dictionary plus classifier, together with the settings that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    /// Stage settings; the cloud lists are not kept.
    pub config: ExperimentConfig,
    pub dictionary: Option<Dictionary>,
    pub classifier: Classifier,
}

const SYSTEM_MAGIC: &[u8; 4] = b"SLTS";
const SYSTEM_VERSION: u16 = 1;

impl TrainedSystem {
    pub fn new(config: &ExperimentConfig, dictionary: Option<Dictionary>, classifier: Classifier) -> Result<Self> {
        let expected = descriptor_dim(config);
        if classifier.dim() != expected {
            return Err(Error::DimensionMismatch { expected, found: classifier.dim() });
        }
        match (&dictionary, config.feature) {
            (None, FeatureKind::Esf) => {}
            (Some(d), kind) if d.kind == kind => {}
            (Some(d), kind) => {
                return Err(Error::KindMismatch { expected: kind.to_string(), found: d.kind.to_string() })
            }
            (None, kind) => return Err(Error::InvalidParameter(format!("{kind} features need a dictionary"))),
        }
        let config = ExperimentConfig { training: Vec::new(), test: Vec::new(), ..config.clone() };
        Ok(TrainedSystem { config, dictionary, classifier })
    }

    pub fn classes(&self) -> &[String] {
        self.classifier.classes()
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    /// Fails unless `config` would process clouds exactly as this system
    /// was trained to.
    pub fn check_compatible(&self, config: &ExperimentConfig) -> Result<()> {
        if config.fingerprint() == self.fingerprint() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "configuration fingerprint {} differs from the trained system's {}",
                config.fingerprint(),
                self.fingerprint()
            )))
        }
    }

    pub fn describe(&self, features: &FeatureSet) -> Result<BowDescriptor> {
        describe_features(self.dictionary.as_ref(), features)
    }

    pub fn classify_descriptor(&self, descriptor: &BowDescriptor) -> Result<FrameResult> {
        let p = self.classifier.classify(&descriptor.histogram)?;
        Ok(FrameResult { label: self.classes()[p.label].clone(), scores: p.scores, empty: descriptor.empty })
    }

    pub fn classify_features(&self, features: &FeatureSet) -> Result<FrameResult> {
        let descriptor = self.describe(features)?;
        if descriptor.empty {
            log::warn!("{}: no features; classifying the empty histogram", features.source);
        }
        self.classify_descriptor(&descriptor)
    }

    /// Container: magic `SLTS`, version, settings text, fingerprint, then the
    /// optional dictionary and the classifier as nested containers.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(SYSTEM_MAGIC, SYSTEM_VERSION);
        w.str(&self.config.settings_text());
        w.str(&self.fingerprint());
        match &self.dictionary {
            Some(d) => {
                w.u8(1);
                w.bytes(&d.to_bytes());
            }
            None => w.u8(0),
        }
        w.bytes(&self.classifier.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, SYSTEM_MAGIC)?;
        if version != SYSTEM_VERSION {
            return Err(Error::Container(format!("unsupported trained-system version {version}")));
        }
        let config = ExperimentConfig::parse(&r.str()?, Path::new("."))?;
        let fingerprint = r.str()?;
        if fingerprint != config.fingerprint() {
            return Err(Error::Container("stored fingerprint does not match the stored settings".into()));
        }
        let dictionary = match r.u8()? {
            0 => None,
            1 => Some(Dictionary::from_bytes(r.bytes()?)?),
            t => return Err(Error::Container(format!("bad dictionary flag {t}"))),
        };
        let classifier = Classifier::from_bytes(r.bytes()?)?;
        r.finish()?;
        TrainedSystem::new(&config, dictionary, classifier)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}

/// Timings and counts from [`train`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainReport {
    pub extraction: ExtractionStats,
    /// Training clouds that produced no features.
    pub empty_descriptors: usize,
    pub dictionary_seconds: f64,
    pub describe_seconds: f64,
    pub classifier_seconds: f64,
    pub total_seconds: f64,
}

/// Builds a system from already-extracted training features.
pub fn fit(config: &ExperimentConfig, sets: &[FeatureSet], labels: &[String]) -> Result<(TrainedSystem, TrainReport)> {
    let mut report = TrainReport::default();
    let t = Instant::now();
    let dictionary = fit_dictionary(config, sets)?;
    report.dictionary_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let descriptors = sets.iter().map(|s| describe_features(dictionary.as_ref(), s)).collect::<Result<Vec<_>>>()?;
    report.empty_descriptors = descriptors.iter().filter(|d| d.empty).count();
    report.describe_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let classifier = fit_classifier(config, &descriptors, labels)?;
    report.classifier_seconds = t.elapsed().as_secs_f64();
    Ok((TrainedSystem::new(config, dictionary, classifier)?, report))
}

/// Extracts the training clouds and fits the dictionary and classifier.
pub fn train(config: &ExperimentConfig) -> Result<(TrainedSystem, TrainReport)> {
    if config.training.is_empty() {
        return Err(Error::InsufficientData("the training list is empty".into()));
    }
    let t = Instant::now();
    let (sets, extraction) = extract_entries(config, &config.training)?;
    let labels: Vec<String> = config.training.iter().map(|e| e.label.clone()).collect();
    let (system, mut report) = fit(config, &sets, &labels)?;
    report.extraction = extraction;
    report.total_seconds = t.elapsed().as_secs_f64();
    log::info!(
        "trained on {} clouds: {} keypoints, {} features, {} dropped, {} cache hits",
        extraction.clouds,
        extraction.keypoints,
        extraction.features,
        extraction.dropped,
        extraction.cache_hits
    );
    Ok((system, report))
}

/// Labels one in-memory cloud. A cloud without features still gets a label,
/// from the all-zero histogram, and is flagged `empty`.
pub fn classify_frame(system: &TrainedSystem, cloud: &PointCloud) -> Result<FrameResult> {
    let (features, _) = extract_cloud(&system.config, cloud, cloud.label.as_deref().unwrap_or("frame"))?;
    system.classify_features(&features)
}

/// One classified test cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub path: PathBuf,
    pub truth: String,
    pub predicted: String,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub report: EvaluationReport,
    pub predictions: Vec<PredictionRecord>,
    /// Clouds that could not be read or processed, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    pub extraction: ExtractionStats,
    pub classify_seconds: f64,
}

/// Classifies every listed cloud and evaluates against the listed labels.
/// Unreadable clouds are skipped and reported; an empty list is an error.
pub fn test(system: &TrainedSystem, entries: &[CloudEntry]) -> Result<TestOutcome> {
    if entries.is_empty() {
        return Err(Error::InsufficientData("the test list is empty".into()));
    }
    let (sets, failed, extraction) = extract_entries_lenient(&system.config, entries);
    let skipped: Vec<(PathBuf, String)> = failed
        .into_iter()
        .map(|(i, e)| {
            log::warn!("skipping {}: {e}", entries[i].path.display());
            (entries[i].path.clone(), e.to_string())
        })
        .collect();
    if sets.is_empty() {
        return Err(Error::InsufficientData(format!("none of the {} test clouds could be processed", entries.len())));
    }
    let t = Instant::now();
    let predictions = sets
        .iter()
        .map(|(i, set)| {
            let r = system.classify_features(set)?;
            Ok(PredictionRecord {
                path: entries[*i].path.clone(),
                truth: entries[*i].label.clone(),
                predicted: r.label,
                empty: r.empty,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classify_seconds = t.elapsed().as_secs_f64();
    let report = evaluate_predictions(system.classes(), &predictions)?;
    Ok(TestOutcome { report, predictions, skipped, extraction, classify_seconds })
}

/// Evaluates over the classifier's classes plus any label seen only in the truth.
pub fn evaluate_predictions(classes: &[String], predictions: &[PredictionRecord]) -> Result<EvaluationReport> {
    let mut all: Vec<String> = classes.to_vec();
    all.extend(predictions.iter().map(|p| p.truth.clone()));
    all.sort();
    all.dedup();
    let predicted: Vec<&str> = predictions.iter().map(|p| p.predicted.as_str()).collect();
    let truth: Vec<&str> = predictions.iter().map(|p| p.truth.as_str()).collect();
    evaluate(&predicted, &truth, &all)
}

/// Trains on `config.training` and tests on `config.test`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(TrainedSystem, TrainReport, TestOutcome)> {
    let (system, report) = train(config)?;
    let outcome = test(&system, &config.test)?;
    Ok((system, report, outcome))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub std_dev: f64,
}

/// Stratified `folds`-fold cross-validation over the training list. Each
/// class's clouds are shuffled with the configured seed and dealt round-robin
/// to folds; the dictionary is rebuilt inside every fold.
pub fn validate(config: &ExperimentConfig, folds: usize) -> Result<ValidationSummary> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    let classes = config.classes();
    let mut fold_of = vec![0usize; config.training.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed());
    for class in &classes {
        let mut members: Vec<usize> =
            (0..config.training.len()).filter(|&i| &config.training[i].label == class).collect();
        if members.len() < folds {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} clouds, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = j % folds;
        }
    }
    let (sets, _) = extract_entries(config, &config.training)?;
    let mut fold_accuracies = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut train_sets, mut train_labels, mut held) = (Vec::new(), Vec::new(), Vec::new());
        for (i, set) in sets.iter().enumerate() {
            if fold_of[i] == f {
                held.push(i);
            } else {
                train_sets.push(set.clone());
                train_labels.push(config.training[i].label.clone());
            }
        }
        let (system, _) = fit(config, &train_sets, &train_labels)?;
        let predictions = held
            .iter()
            .map(|&i| {
                let r = system.classify_features(&sets[i])?;
                Ok(PredictionRecord {
                    path: config.training[i].path.clone(),
                    truth: config.training[i].label.clone(),
                    predicted: r.label,
                    empty: r.empty,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        fold_accuracies.push(evaluate_predictions(system.classes(), &predictions)?.accuracy);
    }
    let n = folds as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / n;
    let std_dev = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(ValidationSummary { fold_accuracies, mean, std_dev })
}

const TABLE_MAGIC: &[u8; 4] = b"SLBD";
const TABLE_VERSION: u16 = 1;

/// Serializes descriptors: magic `SLBD`, version, count, then per descriptor
/// source, optional label, empty flag, length and f64 values.
pub fn descriptors_to_bytes(descriptors: &[BowDescriptor]) -> Vec<u8> {
    let mut w = Writer::new(TABLE_MAGIC, TABLE_VERSION);
    w.len(descriptors.len());
    for d in descriptors {
        w.str(&d.source);
        match &d.label {
            Some(l) => {
                w.u8(1);
                w.str(l);
            }
            None => w.u8(0),
        }
        w.u8(d.empty as u8);
        w.len(d.histogram.len());
        for &v in &d.histogram {
            w.f64(v);
        }
    }
    w.finish()
}

pub fn descriptors_from_bytes(bytes: &[u8]) -> Result<Vec<BowDescriptor>> {
    let (mut r, version) = Reader::new(bytes, TABLE_MAGIC)?;
    if version != TABLE_VERSION {
        return Err(Error::Container(format!("unsupported descriptor table version {version}")));
    }
    let n = r.len()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let source = r.str()?;
        let label = match r.u8()? {
            0 => None,
            1 => Some(r.str()?),
            t => return Err(Error::Container(format!("bad label flag {t}"))),
        };
        let empty = r.u8()? != 0;
        let len = r.len()?;
        let histogram = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
        out.push(BowDescriptor { histogram, empty, source, label });
    }
    r.finish()?;
    Ok(out)
}

pub fn save_descriptors(path: impl AsRef<Path>, descriptors: &[BowDescriptor]) -> Result<()> {
    codec::write_file(path.as_ref(), &descriptors_to_bytes(descriptors))
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<BowDescriptor>> {
    descriptors_from_bytes(&codec::read_file(path.as_ref())?)
}
