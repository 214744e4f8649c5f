//! Computes every local descriptor at the Uniform Sampling keypoints of one
//! cloud. Each line shows the descriptor size, how many keypoints were kept
//! or dropped, and the time taken.
//!
//! ```text
//! cargo run --release --example local_descriptors
//! ```

use std::time::Instant;

use semloc::cloud::estimate_normals;
use semloc::features::{
    compute_cshot, compute_fpfh, compute_pfh, compute_pfhrgb, compute_shot, FeatureKind, FeatureSet,
};
use semloc::keypoints::{uniform_sampling, DEFAULT_US_RADIUS};
use semloc::pipeline::SceneSpec;

fn main() -> semloc::Result<()> {
    let spec = SceneSpec::desk(3);
    // the professor-office scene: desk, floor and a sphere
    let cloud = estimate_normals(&spec.generate_cloud(2, 0), 0.05)?;
    let keypoints = uniform_sampling(&cloud, DEFAULT_US_RADIUS)?;
    println!("{} points, {} keypoints", cloud.len(), keypoints.len());

    type Extractor = fn(&semloc::cloud::PointCloud, &semloc::keypoints::KeypointSet, f64) -> semloc::Result<FeatureSet>;
    let extractors: [(FeatureKind, Extractor); 5] = [
        (FeatureKind::Pfh, compute_pfh),
        (FeatureKind::PfhRgb, compute_pfhrgb),
        (FeatureKind::Fpfh, compute_fpfh),
        (FeatureKind::Shot, compute_shot),
        (FeatureKind::CShot, compute_cshot),
    ];
    for (kind, extract) in extractors {
        let t = Instant::now();
        let set = extract(&cloud, &keypoints, kind.default_radius())?;
        let mass: f32 = set.row(0).iter().sum();
        println!(
            "{:<7} dim {:>5}  kept {:>4}  dropped {:>3}  first-row sum {:>7.3}  {:.2}s",
            kind.name(),
            set.dim(),
            set.kept(),
            set.dropped,
            mass,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
