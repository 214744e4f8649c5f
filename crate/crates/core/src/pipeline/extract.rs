//! Per-cloud feature extraction (normals, keypoints, descriptors) with an
//! optional content-addressed cache.
//!
//! A cache entry is named by the SHA-256 of the cloud file's bytes followed by
//! the extraction settings, so editing either one misses the cache while
//! re-running an unchanged experiment recomputes nothing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{CloudEntry, DetectorKind, ExperimentConfig};
use crate::cloud::{estimate_normals, parse_pcd, PointCloud};
use crate::codec;
use crate::error::{Error, Result};
use crate::features::{
    compute_cshot, compute_esf, compute_fpfh, compute_pfh, compute_pfhrgb, compute_shot, FeatureKind, FeatureSet,
};
use crate::keypoints::{harris3d, uniform_sampling, KeypointSet};

/// What happened to one cloud.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CloudStats {
    pub points: usize,
    /// Points with non-finite coordinates removed while loading.
    pub non_finite: usize,
    pub keypoints: usize,
    pub features: usize,
    /// Keypoints without a usable support neighborhood.
    pub dropped: usize,
    pub cached: bool,
    pub load_seconds: f64,
    pub normals_seconds: f64,
    pub detect_seconds: f64,
    pub describe_seconds: f64,
}

/// Totals over a batch of clouds. Stage times are summed over clouds, so
/// with several threads they can exceed the wall time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtractionStats {
    pub clouds: usize,
    pub points: usize,
    pub non_finite: usize,
    pub keypoints: usize,
    pub features: usize,
    pub dropped: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub load_seconds: f64,
    pub normals_seconds: f64,
    pub detect_seconds: f64,
    pub describe_seconds: f64,
    pub wall_seconds: f64,
}

impl ExtractionStats {
    fn add(&mut self, c: &CloudStats) {
        self.clouds += 1;
        self.points += c.points;
        self.non_finite += c.non_finite;
        self.keypoints += c.keypoints;
        self.features += c.features;
        self.dropped += c.dropped;
        if c.cached {
            self.cache_hits += 1;
        } else {
            self.cache_misses += 1;
        }
        self.load_seconds += c.load_seconds;
        self.normals_seconds += c.normals_seconds;
        self.detect_seconds += c.detect_seconds;
        self.describe_seconds += c.describe_seconds;
    }

    pub fn merge(&mut self, other: &ExtractionStats) {
        self.clouds += other.clouds;
        self.points += other.points;
        self.non_finite += other.non_finite;
        self.keypoints += other.keypoints;
        self.features += other.features;
        self.dropped += other.dropped;
        self.cache_hits += other.cache_hits;
        self.cache_misses += other.cache_misses;
        self.load_seconds += other.load_seconds;
        self.normals_seconds += other.normals_seconds;
        self.detect_seconds += other.detect_seconds;
        self.describe_seconds += other.describe_seconds;
        self.wall_seconds += other.wall_seconds;
    }
}

/// Settings that determine a cloud's feature set, one per line.
pub fn extraction_key(config: &ExperimentConfig) -> String {
    if config.feature == FeatureKind::Esf {
        return format!(
            "feature=esf\nsamples={}\nresolution={}\nseed={}\n",
            config.esf.samples, config.esf.voxel_resolution, config.esf.seed
        );
    }
    let detector = match config.detector {
        DetectorKind::UniformSampling => format!("uniform_sampling radius={}", config.us_radius),
        DetectorKind::Harris3d => {
            let h = &config.harris;
            format!(
                "harris3d support={} nms={} threshold={} k={}",
                h.support_radius, h.nms_radius, h.threshold, h.response_constant
            )
        }
    };
    format!(
        "normal_radius={}\ndetector={detector}\nfeature={}\nfeature_radius={}\n",
        config.normal_radius,
        config.feature.name(),
        config.feature_radius()
    )
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs every per-cloud stage, from normal estimation to description, on an in-memory cloud.
pub fn extract_cloud(config: &ExperimentConfig, cloud: &PointCloud, source: &str) -> Result<(FeatureSet, CloudStats)> {
    let mut stats = CloudStats { points: cloud.len(), ..CloudStats::default() };
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if config.feature == FeatureKind::Esf {
        let t = Instant::now();
        let v = compute_esf(cloud, &config.esf)?;
        let mut set = FeatureSet::new(FeatureKind::Esf, source);
        set.push(&v.values)?;
        stats.describe_seconds = elapsed(t);
        stats.features = 1;
        return Ok((set, stats));
    }

    let t = Instant::now();
    let with_normals = estimate_normals(cloud, config.normal_radius)?;
    stats.normals_seconds = elapsed(t);

    let t = Instant::now();
    let keypoints: KeypointSet = match config.detector {
        DetectorKind::UniformSampling => uniform_sampling(&with_normals, config.us_radius)?,
        DetectorKind::Harris3d => harris3d(&with_normals, &config.harris)?,
    };
    stats.detect_seconds = elapsed(t);
    stats.keypoints = keypoints.len();

    let t = Instant::now();
    let radius = config.feature_radius();
    let mut set = match config.feature {
        FeatureKind::Pfh => compute_pfh(&with_normals, &keypoints, radius)?,
        FeatureKind::PfhRgb => compute_pfhrgb(&with_normals, &keypoints, radius)?,
        FeatureKind::Fpfh => compute_fpfh(&with_normals, &keypoints, radius)?,
        FeatureKind::Shot => compute_shot(&with_normals, &keypoints, radius)?,
        FeatureKind::CShot => compute_cshot(&with_normals, &keypoints, radius)?,
        FeatureKind::Esf => unreachable!("handled above"),
    };
    set.source = source.to_string();
    stats.describe_seconds = elapsed(t);
    stats.features = set.len();
    stats.dropped = set.dropped;
    Ok((set, stats))
}

fn cache_path(dir: &Path, cloud_bytes: &[u8], key: &str) -> PathBuf {
    let mut h = Sha256::new();
    h.update(cloud_bytes);
    h.update([0u8]);
    h.update(key.as_bytes());
    dir.join(format!("{}.slfs", hex::encode(h.finalize())))
}

/// Loads a PCD file and extracts its features, consulting the cache first.
/// Errors carry the file path and the failing stage.
pub fn extract_file(config: &ExperimentConfig, path: &Path) -> Result<(FeatureSet, CloudStats)> {
    let source = path.display().to_string();
    let t = Instant::now();
    let bytes = codec::read_file(path).map_err(|e| e.at_stage("load", path))?;
    let cached = config.cache_dir.as_ref().map(|dir| cache_path(dir, &bytes, &extraction_key(config)));
    if let Some(file) = cached.as_ref().filter(|f| f.is_file()) {
        // an unreadable entry is recomputed and overwritten
        match FeatureSet::load(file) {
            Ok(mut set) if set.kind == config.feature => {
                set.source = source;
                let keypoints = if set.kind == FeatureKind::Esf { 0 } else { set.len() + set.dropped };
                let stats = CloudStats {
                    keypoints,
                    features: set.len(),
                    dropped: set.dropped,
                    cached: true,
                    load_seconds: elapsed(t),
                    ..CloudStats::default()
                };
                return Ok((set, stats));
            }
            Ok(_) => log::warn!("cache entry {} holds another feature kind; recomputing", file.display()),
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", file.display()),
        }
    }
    let (cloud, non_finite) = parse_pcd(&bytes).map_err(|e| e.at_stage("load", path))?;
    let load_seconds = elapsed(t);
    let (set, mut stats) = extract_cloud(config, &cloud, &source).map_err(|e| e.at_stage("extract", path))?;
    stats.load_seconds = load_seconds;
    stats.non_finite = non_finite;
    if let Some(file) = cached {
        let dir = file.parent().expect("cache file has a directory");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        // write-then-rename so concurrent runs never observe a torn entry
        let tmp = file.with_extension(format!("tmp{}", std::process::id()));
        set.save(&tmp)?;
        std::fs::rename(&tmp, &file).map_err(|e| Error::io(&file, e))?;
    }
    Ok((set, stats))
}

/// Extracts every entry in parallel, in entry order.
pub fn extract_entries(
    config: &ExperimentConfig,
    entries: &[CloudEntry],
) -> Result<(Vec<FeatureSet>, ExtractionStats)> {
    let t = Instant::now();
    let results: Vec<(FeatureSet, CloudStats)> =
        entries.par_iter().map(|e| extract_file(config, &e.path)).collect::<Result<_>>()?;
    let mut stats = ExtractionStats::default();
    let sets = results
        .into_iter()
        .map(|(set, s)| {
            stats.add(&s);
            set
        })
        .collect();
    stats.wall_seconds = elapsed(t);
    Ok((sets, stats))
}

/// Successful extractions and failures, each tagged with its entry index.
pub type LenientExtraction = (Vec<(usize, FeatureSet)>, Vec<(usize, Error)>, ExtractionStats);

/// Like [`extract_entries`] but skips clouds that fail, returning each
/// failure alongside its entry index.
pub fn extract_entries_lenient(config: &ExperimentConfig, entries: &[CloudEntry]) -> LenientExtraction {
    let t = Instant::now();
    let results: Vec<Result<(FeatureSet, CloudStats)>> =
        entries.par_iter().map(|e| extract_file(config, &e.path)).collect();
    let (mut ok, mut failed, mut stats) = (Vec::new(), Vec::new(), ExtractionStats::default());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((set, s)) => {
                stats.add(&s);
                ok.push((i, set));
            }
            Err(e) => failed.push((i, e)),
        }
    }
    stats.wall_seconds = elapsed(t);
    (ok, failed, stats)
}
