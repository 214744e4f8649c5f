//! Grid evaluation over detector, feature, dictionary size and classifier.
//!
//! Features are extracted once per (detector, feature) pair and a dictionary
//! is built once per size, so each extra classifier only pays for its own
//! training and prediction.

use std::fmt::Write as _;
use std::time::Instant;

use super::config::{ClassifierKind, DetectorKind, ExperimentConfig};
use super::extract::extract_entries;
use super::{describe_features, evaluate_predictions, fit_classifier, fit_dictionary, PredictionRecord, TrainedSystem};
use crate::error::{Error, Result};
use crate::features::FeatureKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub detectors: Vec<DetectorKind>,
    pub features: Vec<FeatureKind>,
    pub ks: Vec<usize>,
    pub classifiers: Vec<ClassifierKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `none` for the global ESF descriptor.
    pub detector: String,
    pub feature: FeatureKind,
    /// The descriptor length; 640 for ESF.
    pub k: usize,
    pub classifier: ClassifierKind,
    pub accuracy: f64,
    /// Training-cloud extraction + dictionary + classifier fitting.
    pub train_seconds: f64,
    /// Test-cloud extraction + description + prediction.
    pub test_seconds: f64,
}

/// Runs the grid on `config.training` / `config.test`; all other settings
/// come from `config`. ESF ignores the detector and dictionary size and
/// contributes one row per classifier.
pub fn sweep(config: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if config.training.is_empty() || config.test.is_empty() {
        return Err(Error::InsufficientData("a sweep needs both training and test clouds".into()));
    }
    if grid.detectors.is_empty() || grid.features.is_empty() || grid.ks.is_empty() || grid.classifiers.is_empty() {
        return Err(Error::InvalidParameter("every sweep axis needs at least one value".into()));
    }
    let train_labels: Vec<String> = config.training.iter().map(|e| e.label.clone()).collect();
    let mut rows = Vec::new();
    for &feature in &grid.features {
        let detectors: Vec<Option<DetectorKind>> =
            if feature == FeatureKind::Esf { vec![None] } else { grid.detectors.iter().copied().map(Some).collect() };
        for detector in detectors {
            let mut c = ExperimentConfig { feature, ..config.clone() };
            if let Some(d) = detector {
                c.detector = d;
            }
            let (train_sets, train_stats) = extract_entries(&c, &c.training)?;
            let (test_sets, test_stats) = extract_entries(&c, &c.test)?;
            let ks: Vec<usize> =
                if feature == FeatureKind::Esf { vec![FeatureKind::Esf.dimension()] } else { grid.ks.clone() };
            for &k in &ks {
                c.dictionary.kmeans.k = k;
                let t = Instant::now();
                let dictionary = fit_dictionary(&c, &train_sets)?;
                let train_desc =
                    train_sets.iter().map(|s| describe_features(dictionary.as_ref(), s)).collect::<Result<Vec<_>>>()?;
                let dict_seconds = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let test_desc =
                    test_sets.iter().map(|s| describe_features(dictionary.as_ref(), s)).collect::<Result<Vec<_>>>()?;
                let describe_test_seconds = t.elapsed().as_secs_f64();
                for &classifier in &grid.classifiers {
                    c.classifier = classifier;
                    let t = Instant::now();
                    let model = fit_classifier(&c, &train_desc, &train_labels)?;
                    let fit_seconds = t.elapsed().as_secs_f64();
                    let system = TrainedSystem::new(&c, dictionary.clone(), model)?;
                    let t = Instant::now();
                    let predictions = test_desc
                        .iter()
                        .zip(&c.test)
                        .map(|(d, e)| {
                            let r = system.classify_descriptor(d)?;
                            Ok(PredictionRecord {
                                path: e.path.clone(),
                                truth: e.label.clone(),
                                predicted: r.label,
                                empty: r.empty,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let predict_seconds = t.elapsed().as_secs_f64();
                    let report = evaluate_predictions(system.classes(), &predictions)?;
                    rows.push(SweepRow {
                        detector: detector.map_or("none", DetectorKind::name).to_string(),
                        feature,
                        k,
                        classifier,
                        accuracy: report.accuracy,
                        train_seconds: train_stats.wall_seconds + dict_seconds + fit_seconds,
                        test_seconds: test_stats.wall_seconds + describe_test_seconds + predict_seconds,
                    });
                    log::info!(
                        "{} {} k={} {}: accuracy {:.4}",
                        rows.last().unwrap().detector,
                        feature,
                        k,
                        classifier.name(),
                        report.accuracy
                    );
                }
            }
        }
    }
    Ok(rows)
}

/// Header `detector,feature,k,classifier,accuracy,train_seconds,test_seconds`
/// and one line per row.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("detector,feature,k,classifier,accuracy,train_seconds,test_seconds\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.6},{:.3},{:.3}",
            r.detector,
            r.feature.name(),
            r.k,
            r.classifier.name(),
            r.accuracy,
            r.train_seconds,
            r.test_seconds
        )
        .unwrap();
    }
    s
}

/// Gnuplot data: one block per (detector, feature, classifier), each a
/// `k accuracy` series, separated by two blank lines so `index` selects a
/// block.
pub fn sweep_dat(rows: &[SweepRow]) -> String {
    let mut keys: Vec<(String, FeatureKind, ClassifierKind)> = Vec::new();
    for r in rows {
        let key = (r.detector.clone(), r.feature, r.classifier);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut s = String::new();
    for (b, (det, feat, cls)) in keys.iter().enumerate() {
        if b > 0 {
            s.push_str("\n\n");
        }
        writeln!(s, "# {det} {} {}", feat.name(), cls.name()).unwrap();
        writeln!(s, "# k accuracy").unwrap();
        let mut series: Vec<&SweepRow> =
            rows.iter().filter(|r| &r.detector == det && r.feature == *feat && r.classifier == *cls).collect();
        series.sort_by_key(|r| r.k);
        for r in series {
            writeln!(s, "{} {:.6}", r.k, r.accuracy).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::synth::{generate_synthetic_dataset, SceneSpec};
    use super::*;

    #[test]
    fn grid_shape_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec { points_per_cloud: 1000, clouds_per_category: 2, ..SceneSpec::desk(5) };
        let data = generate_synthetic_dataset(&spec, dir.path(), Some(0.5)).unwrap();
        let config = ExperimentConfig::read(&data.manifest).unwrap();
        let grid = SweepGrid {
            detectors: vec![DetectorKind::UniformSampling],
            features: vec![FeatureKind::Fpfh, FeatureKind::Esf],
            ks: vec![4, 8],
            classifiers: vec![ClassifierKind::Svm, ClassifierKind::Knn],
        };
        let rows = sweep(&config, &grid).unwrap();
        assert_eq!(rows.len(), 2 * 2 + 2);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), rows.len() + 1);
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 7));
        let dat = sweep_dat(&rows);
        assert_eq!(dat.matches("\n\n\n").count(), 3);
        assert!(dat.contains("# none esf svm\n# k accuracy\n640 "));
    }
}
