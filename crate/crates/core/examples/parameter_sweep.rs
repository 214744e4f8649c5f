//! Runs a small detector x feature x dictionary-size x classifier grid and
//! prints the accuracy table as CSV.
//!
//! ```text
//! cargo run --release --example parameter_sweep
//! ```

use semloc::features::FeatureKind;
use semloc::pipeline::{
    generate_synthetic_dataset, sweep, sweep_csv, ClassifierKind, DetectorKind, ExperimentConfig, SceneSpec, SweepGrid,
};

fn main() -> semloc::Result<()> {
    let spec = SceneSpec { clouds_per_category: 8, points_per_cloud: 2000, ..SceneSpec::desk(77) };
    let dir = std::env::temp_dir().join("semloc-sweep");
    let data = generate_synthetic_dataset(&spec, &dir, Some(0.5))?;
    let mut config = ExperimentConfig::read(&data.manifest)?;
    // repeated runs reuse the extracted features
    config.cache_dir = Some(dir.join("cache"));

    let grid = SweepGrid {
        detectors: DetectorKind::ALL.to_vec(),
        features: vec![FeatureKind::Fpfh, FeatureKind::Esf],
        ks: vec![25, 50],
        classifiers: vec![ClassifierKind::Svm, ClassifierKind::Knn],
    };
    let rows = sweep(&config, &grid)?;
    print!("{}", sweep_csv(&rows));
    let best = rows.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy)).expect("non-empty grid");
    println!(
        "\nbest: {} + {} k={} {} -> {:.3}",
        best.detector,
        best.feature,
        best.k,
        best.classifier.name(),
        best.accuracy
    );
    Ok(())
}
