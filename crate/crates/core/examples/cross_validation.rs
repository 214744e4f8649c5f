//! Stratified k-fold cross-validation over the training list; the dictionary
//! is rebuilt inside every fold.
//!
//! ```text
//! cargo run --release --example cross_validation [folds]
//! ```

use semloc::pipeline::{generate_synthetic_dataset, validate, ExperimentConfig, SceneSpec};

fn main() -> semloc::Result<()> {
    let folds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let spec = SceneSpec { clouds_per_category: 8, points_per_cloud: 2000, ..SceneSpec::desk(8) };
    let dir = std::env::temp_dir().join("semloc-validation");
    // everything goes to the training list
    let data = generate_synthetic_dataset(&spec, &dir, None)?;
    let mut config = ExperimentConfig::read(&data.manifest)?;
    config.dictionary.kmeans.k = 25;

    let summary = validate(&config, folds)?;
    for (i, a) in summary.fold_accuracies.iter().enumerate() {
        println!("fold {}: {:.3}", i + 1, a);
    }
    println!("mean {:.3} +/- {:.3} over {} clouds", summary.mean, summary.std_dev, data.training.len());
    Ok(())
}
