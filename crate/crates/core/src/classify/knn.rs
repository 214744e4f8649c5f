use serde::{Deserialize, Serialize};

use super::kernel::{chi2, euclidean};
use super::{LabeledDataset, Prediction};
use crate::error::{Error, Result};

/// Default neighborhood size of the experiments.
pub const DEFAULT_KNN_K: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Distance {
    #[default]
    Euclidean,
    ChiSquare,
}

impl Distance {
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => euclidean(x, y),
            Distance::ChiSquare => chi2(x, y),
        }
    }
}

/// Instance-based classifier: the training set is the model.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub data: LabeledDataset,
    pub k: usize,
    pub distance: Distance,
}

impl KnnModel {
    pub fn new(data: LabeledDataset, k: usize, distance: Distance) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("kNN needs k >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::InsufficientData("kNN needs at least one training example".into()));
        }
        Ok(KnnModel { data, k, distance })
    }

    /// Training indices of the `min(k, n)` nearest examples, closest first;
    /// equal distances keep the lower index first.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch { expected: self.data.dim(), found: x.len() });
        }
        let mut all: Vec<(usize, f64)> =
            self.data.vectors.iter().enumerate().map(|(i, v)| (i, self.distance.eval(v, x))).collect();
        let k = self.k.min(all.len());
        let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, by_distance);
            all.truncate(k);
        }
        all.sort_by(by_distance);
        Ok(all)
    }

    /// Majority vote among the nearest neighbors. When several classes tie on
    /// votes, the one owning the closest of those neighbors wins. Scores are
    /// vote fractions.
    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        let neighbors = self.neighbors(x)?;
        let mut votes = vec![0usize; self.data.classes.len()];
        for &(i, _) in &neighbors {
            votes[self.data.labels[i]] += 1;
        }
        let top = votes.iter().copied().max().unwrap_or(0);
        let label = neighbors
            .iter()
            .map(|&(i, _)| self.data.labels[i])
            .find(|&c| votes[c] == top)
            .expect("at least one neighbor");
        let n = neighbors.len() as f64;
        Ok(Prediction { label, scores: votes.iter().map(|&v| v as f64 / n).collect() })
    }
}

/// Free-function form of [`KnnModel::classify`].
pub fn knn_classify(model: &KnnModel, x: &[f64]) -> Result<Prediction> {
    model.classify(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        LabeledDataset::from_names(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0]],
            &["a", "a", "a", "b", "b"],
        )
        .unwrap()
    }

    #[test]
    fn single_class_always_wins() {
        let d = LabeledDataset::from_names(vec![vec![0.0], vec![3.0]], &["x", "x"]).unwrap();
        let m = KnnModel::new(d, 7, Distance::Euclidean).unwrap();
        assert_eq!(m.classify(&[100.0]).unwrap().label, 0);
    }

    #[test]
    fn majority_and_scores() {
        let m = KnnModel::new(toy(), 3, Distance::Euclidean).unwrap();
        let p = m.classify(&[4.0, 4.0]).unwrap();
        assert_eq!(p.label, 1);
        assert!((p.scores[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vote_tie_goes_to_nearest_class() {
        // k = 2: one neighbor from each class, the "b" one is closer
        let m = KnnModel::new(toy(), 2, Distance::Euclidean).unwrap();
        let d = LabeledDataset::from_names(vec![vec![0.0], vec![2.0]], &["a", "b"]).unwrap();
        let m2 = KnnModel::new(d, 2, Distance::Euclidean).unwrap();
        assert_eq!(m2.classify(&[1.5]).unwrap().label, 1);
        assert_eq!(m2.classify(&[0.5]).unwrap().label, 0);
        // exactly between: distance tie, lower index first, so class "a"
        assert_eq!(m2.classify(&[1.0]).unwrap().label, 0);
        assert_eq!(m.classify(&[0.0, 0.0]).unwrap().label, 0);
    }

    #[test]
    fn k_larger_than_data_uses_everything() {
        let m = KnnModel::new(toy(), 50, Distance::ChiSquare).unwrap();
        assert_eq!(m.neighbors(&[1.0, 1.0]).unwrap().len(), 5);
        assert_eq!(m.classify(&[9.0, 9.0]).unwrap().label, 0);
        assert!(m.classify(&[1.0]).is_err());
    }
}
