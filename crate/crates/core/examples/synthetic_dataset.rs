//! Generates a small labeled dataset of synthetic rooms and prints the
//! manifest, which doubles as an experiment configuration.
//!
//! ```text
//! cargo run --release --example synthetic_dataset [out_dir]
//! ```

use std::path::PathBuf;

use semloc::cloud::load_pcd;
use semloc::pipeline::{generate_synthetic_dataset, ExperimentConfig, SceneSpec};

fn main() -> semloc::Result<()> {
    let out =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("semloc-synthetic"));
    let spec = SceneSpec { clouds_per_category: 4, points_per_cloud: 2000, ..SceneSpec::desk(2024) };
    for a in &spec.categories {
        println!("{}: {} primitives", a.code, a.primitives.len());
    }
    let data = generate_synthetic_dataset(&spec, &out, Some(0.5))?;
    println!("\n{} training + {} test clouds in {}", data.training.len(), data.test.len(), out.display());

    let first = load_pcd(&data.training[0].path)?;
    let (lo, hi) = first.bounds().expect("non-empty cloud");
    println!(
        "{}: {} points, colored = {}, bounds {:.2?} .. {:.2?}",
        data.training[0].path.display(),
        first.len(),
        first.has_color(),
        lo,
        hi
    );

    let text = std::fs::read_to_string(&data.manifest)
        .map_err(|source| semloc::Error::Io { path: data.manifest.clone(), source })?;
    println!("\n{}:\n{}", data.manifest.display(), text.lines().take(8).collect::<Vec<_>>().join("\n"));
    let config = ExperimentConfig::read(&data.manifest)?;
    println!(
        "...\nparsed back: classes {:?}, detector {}, feature {}",
        config.classes(),
        config.detector.name(),
        config.feature
    );
    Ok(())
}
