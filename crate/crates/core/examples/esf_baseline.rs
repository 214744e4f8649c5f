//! The global ESF descriptor: one 640-bin signature per cloud, classified
//! directly without keypoints or a dictionary.
//!
//! ```text
//! cargo run --release --example esf_baseline [clouds_per_category]
//! ```

use semloc::features::{compute_esf, EsfParams, FeatureKind};
use semloc::pipeline::{
    generate_synthetic_dataset, run_experiment, show_results, ExperimentConfig, OutputFormat, SceneSpec,
};

fn main() -> semloc::Result<()> {
    let per_class = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = SceneSpec { clouds_per_category: per_class, ..SceneSpec::desk(12) };

    let signature = compute_esf(&spec.generate_cloud(0, 0), &EsfParams::default())?;
    let nonzero = signature.values.iter().filter(|&&v| v > 0.0).count();
    println!("ESF of one corridor cloud: {} bins, {nonzero} non-zero", signature.dimension());

    let dir = std::env::temp_dir().join(format!("semloc-esf-{per_class}"));
    let data = generate_synthetic_dataset(&spec, &dir, Some(0.6))?;
    let mut config = ExperimentConfig::read(&data.manifest)?;
    config.feature = FeatureKind::Esf;
    let (system, train, outcome) = run_experiment(&config)?;
    println!(
        "trained on {} clouds without a dictionary ({}), classifier input {}",
        train.extraction.clouds,
        if system.dictionary.is_none() { "none built" } else { "unexpected" },
        system.classifier.dim()
    );
    print!("{}", show_results(&outcome.report, OutputFormat::Text));
    Ok(())
}
