//! Generates a synthetic five-room dataset, trains a bag-of-words SVM on
//! Uniform Sampling + FPFH features and reports test accuracy.
//!
//! ```text
//! cargo run --release --example semantic_localization [clouds_per_category]
//! ```

use std::time::Instant;

use semloc::pipeline::{
    generate_synthetic_dataset, run_experiment, show_results, ExperimentConfig, OutputFormat, SceneSpec,
};

fn main() -> semloc::Result<()> {
    let per_class = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let dir = std::env::temp_dir().join(format!("semloc-localization-{per_class}"));
    let spec = SceneSpec { clouds_per_category: per_class, ..SceneSpec::desk(7) };
    let t = Instant::now();
    let data = generate_synthetic_dataset(&spec, &dir, Some(0.6))?;
    println!("generated {} + {} clouds in {:.1}s", data.training.len(), data.test.len(), t.elapsed().as_secs_f64());

    let mut config = ExperimentConfig::read(&data.manifest)?;
    config.dictionary.kmeans.k = 50;

    let (_, train, outcome) = run_experiment(&config)?;
    let e = &train.extraction;
    println!(
        "training: {} keypoints, {} features ({} dropped); normals {:.1}s, detection {:.1}s, description {:.1}s, dictionary {:.1}s, svm {:.2}s",
        e.keypoints, e.features, e.dropped, e.normals_seconds, e.detect_seconds, e.describe_seconds,
        train.dictionary_seconds, train.classifier_seconds
    );
    print!("{}", show_results(&outcome.report, OutputFormat::Text));
    println!("total {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
