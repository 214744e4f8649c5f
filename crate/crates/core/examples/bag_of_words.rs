//! Builds a visual-word dictionary from FPFH features of a few clouds and
//! turns each cloud into a fixed-length word histogram.
//!
//! ```text
//! cargo run --release --example bag_of_words [k]
//! ```

use semloc::bow::{build_dictionary, Dictionary, DictionaryParams};
use semloc::cloud::estimate_normals;
use semloc::features::{compute_fpfh, FeatureKind, FeatureSet};
use semloc::keypoints::{uniform_sampling, DEFAULT_US_RADIUS};
use semloc::pipeline::SceneSpec;

fn main() -> semloc::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(25);
    let spec = SceneSpec { points_per_cloud: 2000, ..SceneSpec::desk(5) };
    let mut sets: Vec<(String, FeatureSet)> = Vec::new();
    for (c, archetype) in spec.categories.iter().enumerate() {
        for i in 0..2 {
            let cloud = estimate_normals(&spec.generate_cloud(c, i), 0.05)?;
            let kps = uniform_sampling(&cloud, DEFAULT_US_RADIUS)?;
            sets.push((archetype.code.clone(), compute_fpfh(&cloud, &kps, FeatureKind::Fpfh.default_radius())?));
        }
    }

    let dictionary = build_dictionary(sets.iter().map(|(_, s)| s), &DictionaryParams::new(k, 42))?;
    println!(
        "dictionary: {} words of dim {} from {} features, {} Lloyd iterations, inertia {:.4}",
        dictionary.k(),
        dictionary.dim(),
        dictionary.trained_on,
        dictionary.iterations,
        dictionary.inertia
    );

    let path = std::env::temp_dir().join("semloc-example.sldc");
    dictionary.save(&path)?;
    let reloaded = Dictionary::load(&path)?;
    println!("saved and reloaded {}: identical = {}", path.display(), reloaded == dictionary);

    for (label, set) in &sets {
        let d = dictionary.describe(set)?;
        let top: Vec<String> = {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.sort_by(|&a, &b| d.histogram[b].total_cmp(&d.histogram[a]));
            idx.iter().take(3).map(|&j| format!("w{j}={:.2}", d.histogram[j])).collect()
        };
        println!("{label}: {:>4} features -> length {} histogram, top words {}", set.len(), d.len(), top.join(" "));
    }
    Ok(())
}
