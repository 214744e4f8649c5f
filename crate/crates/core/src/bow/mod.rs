//! Visual dictionary and Bag-of-Words histograms.
//!
//! Features from all training clouds are merged and clustered with k-means;
//! each centroid is a visual word. A cloud is then described by the relative
//! frequency with which its features hit each word, which gives every cloud a
//! descriptor of length `k` regardless of how many features it produced.

mod kmeans;

pub use kmeans::{kmeans, KMeansParams, KMeansResult};

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSet};

/// Dictionary sizes of the experiment grid.
pub const DICTIONARY_SIZES: [usize; 4] = [25, 50, 100, 200];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryParams {
    pub kmeans: KMeansParams,
    /// Cluster a seeded random subset of at most this many features.
    pub max_features: Option<usize>,
}

impl DictionaryParams {
    pub fn new(k: usize, seed: u64) -> Self {
        DictionaryParams { kmeans: KMeansParams::new(k, seed), max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub kind: FeatureKind,
    /// `k * dim` little-endian f32 words, row-major.
    words: Vec<f32>,
    pub seed: u64,
    pub iterations: usize,
    pub inertia: f64,
    /// Number of features the words were clustered from.
    pub trained_on: usize,
}

const DICT_MAGIC: &[u8; 4] = b"SLDC";
const DICT_VERSION: u16 = 1;

/// Merges the feature sets and clusters them into `k` words.
pub fn build_dictionary<'a>(
    sets: impl IntoIterator<Item = &'a FeatureSet>,
    params: &DictionaryParams,
) -> Result<Dictionary> {
    let mut kind = None;
    let mut data: Vec<f64> = Vec::new();
    for set in sets {
        match kind {
            None => kind = Some(set.kind),
            Some(k) if k != set.kind => {
                return Err(Error::KindMismatch { expected: k.to_string(), found: set.kind.to_string() })
            }
            _ => {}
        }
        data.extend(set.as_flat().iter().map(|&v| f64::from(v)));
    }
    let kind = kind.ok_or_else(|| Error::InsufficientData("no feature sets to build a dictionary from".into()))?;
    let dim = kind.dimension();
    let total = data.len() / dim;

    if let Some(cap) = params.max_features.filter(|&cap| cap < total) {
        let mut rng = ChaCha8Rng::seed_from_u64(params.kmeans.seed ^ 0x5eed_f00d);
        let mut picks = sample(&mut rng, total, cap).into_vec();
        picks.sort_unstable();
        data = picks.iter().flat_map(|&i| data[i * dim..(i + 1) * dim].to_vec()).collect();
    }
    let used = data.len() / dim;
    let result = kmeans(&data, dim, &params.kmeans)?;
    log::debug!(
        "dictionary {kind} k={} from {used} of {total} features: {} iterations, inertia {:.6}",
        params.kmeans.k,
        result.iterations,
        result.inertia()
    );
    Ok(Dictionary {
        kind,
        words: result.centroids.iter().map(|&v| v as f32).collect(),
        seed: params.kmeans.seed,
        iterations: result.iterations,
        inertia: result.inertia(),
        trained_on: used,
    })
}

impl Dictionary {
    /// Builds a dictionary from explicit words (row-major, `dim` per word).
    pub fn from_words(kind: FeatureKind, words: Vec<f32>) -> Result<Self> {
        let dim = kind.dimension();
        if words.is_empty() || !words.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: words.len() });
        }
        Ok(Dictionary { kind, words, seed: 0, iterations: 0, inertia: 0.0, trained_on: 0 })
    }

    pub fn k(&self) -> usize {
        self.words.len() / self.dim()
    }

    pub fn dim(&self) -> usize {
        self.kind.dimension()
    }

    pub fn word(&self, j: usize) -> &[f32] {
        &self.words[j * self.dim()..(j + 1) * self.dim()]
    }

    pub fn words(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.words.chunks_exact(self.dim())
    }

    /// Index of the closest word (Euclidean); ties go to the lowest index.
    pub fn assign_word(&self, feature: &[f32]) -> Result<usize> {
        if feature.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: feature.len() });
        }
        Ok(self.nearest(feature))
    }

    fn nearest(&self, feature: &[f32]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, w) in self.words().enumerate() {
            let d: f64 = w
                .iter()
                .zip(feature)
                .map(|(&a, &b)| {
                    let t = f64::from(a) - f64::from(b);
                    t * t
                })
                .sum();
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    /// Word-frequency histogram of a feature set.
    pub fn describe(&self, features: &FeatureSet) -> Result<BowDescriptor> {
        if features.kind != self.kind {
            return Err(Error::KindMismatch { expected: self.kind.to_string(), found: features.kind.to_string() });
        }
        let words: Vec<usize> = features.rows().collect::<Vec<_>>().par_iter().map(|r| self.nearest(r)).collect();
        let mut histogram = vec![0.0; self.k()];
        for &w in &words {
            histogram[w] += 1.0;
        }
        let empty = words.is_empty();
        if !empty {
            let n = words.len() as f64;
            histogram.iter_mut().for_each(|h| *h /= n);
        }
        Ok(BowDescriptor { histogram, empty, source: features.source.clone(), label: None })
    }

    /// Container: magic `SLDC`, version, kind tag, k, dimension, seed,
    /// iterations, inertia, trained-on count, then `k * dim` f32 words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(DICT_MAGIC, DICT_VERSION);
        w.u8(self.kind.tag());
        w.u32(self.k() as u32);
        w.u32(self.dim() as u32);
        w.u64(self.seed);
        w.len(self.iterations);
        w.f64(self.inertia);
        w.len(self.trained_on);
        for &v in &self.words {
            w.f32(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, DICT_MAGIC)?;
        if version != DICT_VERSION {
            return Err(Error::Container(format!("unsupported dictionary version {version}")));
        }
        let kind = FeatureKind::from_tag(r.u8()?)?;
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim != kind.dimension() {
            return Err(Error::DimensionMismatch { expected: kind.dimension(), found: dim });
        }
        if k == 0 {
            return Err(Error::Container("dictionary with zero words".into()));
        }
        let seed = r.u64()?;
        let iterations = r.u64()? as usize;
        let inertia = r.f64()?;
        let trained_on = r.u64()? as usize;
        let mut words = Vec::with_capacity((k * dim).min(bytes.len() / 4));
        for _ in 0..k * dim {
            words.push(r.f32()?);
        }
        r.finish()?;
        Ok(Dictionary { kind, words, seed, iterations, inertia, trained_on })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}

/// Normalized word histogram of one cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowDescriptor {
    pub histogram: Vec<f64>,
    /// Set when the cloud produced no features; the histogram is then all zero.
    pub empty: bool,
    pub source: String,
    pub label: Option<String>,
}

impl BowDescriptor {
    pub fn len(&self) -> usize {
        self.histogram.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histogram.is_empty()
    }
}

/// Free-function form of [`Dictionary::describe`].
pub fn compute_bow_descriptor(dictionary: &Dictionary, features: &FeatureSet) -> Result<BowDescriptor> {
    dictionary.describe(features)
}

/// Free-function form of [`Dictionary::assign_word`].
pub fn assign_word(dictionary: &Dictionary, feature: &[f32]) -> Result<usize> {
    dictionary.assign_word(feature)
}
