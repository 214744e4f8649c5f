//! Estimates normals on one synthetic cloud per category and compares the
//! keypoints chosen by Uniform Sampling and Harris3D.
//!
//! ```text
//! cargo run --release --example normals_and_keypoints
//! ```

use std::time::Instant;

use semloc::cloud::estimate_normals;
use semloc::keypoints::{harris3d, uniform_sampling, HarrisConfig, DEFAULT_US_RADIUS};
use semloc::pipeline::SceneSpec;

fn main() -> semloc::Result<()> {
    let spec = SceneSpec::desk(1);
    let harris = HarrisConfig::default();
    println!("{:<4} {:>6} {:>8} {:>10} {:>8} {:>10}", "cat", "points", "invalid", "uniform", "harris", "max resp.");
    for (c, archetype) in spec.categories.iter().enumerate() {
        let raw = spec.generate_cloud(c, 0);
        let t = Instant::now();
        let cloud = estimate_normals(&raw, 0.05)?;
        let normals_s = t.elapsed().as_secs_f64();
        let invalid = cloud.normals.as_ref().map_or(0, |n| n.iter().filter(|n| !n.is_valid()).count());

        let us = uniform_sampling(&cloud, DEFAULT_US_RADIUS)?;
        let h = harris3d(&cloud, &harris)?;
        // keypoints come sorted by decreasing response
        let top = h.keypoints.first().and_then(|k| k.response).unwrap_or(0.0);
        println!(
            "{:<4} {:>6} {:>8} {:>10} {:>8} {:>10.3e}   (normals {:.2}s)",
            archetype.code,
            cloud.len(),
            invalid,
            us.len(),
            h.len(),
            top,
            normals_s
        );
    }
    Ok(())
}
