//! Trains the chi-square SVM and the kNN classifier on toy histograms drawn
//! around three prototypes and compares their predictions.
//!
//! ```text
//! cargo run --example chi_square_svm
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semloc::classify::{
    chi_square_kernel, evaluate, Classifier, Distance, KnnModel, LabeledDataset, SvmModel, SvmParams,
};

fn histogram(rng: &mut ChaCha8Rng, prototype: &[f64]) -> Vec<f64> {
    let mut h: Vec<f64> = prototype.iter().map(|p| (p + rng.random_range(0.0..0.3)).max(0.0)).collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

fn main() -> semloc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prototypes = [[0.6, 0.2, 0.1, 0.1, 0.0], [0.1, 0.6, 0.2, 0.0, 0.1], [0.0, 0.1, 0.1, 0.4, 0.4]];
    let classes = vec!["corridor".to_string(), "office".to_string(), "lab".to_string()];
    let sample = |rng: &mut ChaCha8Rng, n: usize| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            x.push(histogram(rng, &prototypes[i % 3]));
            y.push(i % 3);
        }
        (x, y)
    };
    let (train_x, train_y) = sample(&mut rng, 60);
    let (test_x, test_y) = sample(&mut rng, 30);

    let a = &train_x[0];
    println!("K(x, x) = {}", chi_square_kernel(a, a, 1.0)?);
    println!("K(x, y) = {:.4} for two histograms of different classes", chi_square_kernel(a, &train_x[1], 1.0)?);

    let data = LabeledDataset::new(classes.clone(), train_x, train_y)?;
    let svm = SvmModel::train(&data, &SvmParams::default())?;
    let knn = KnnModel::new(data, 7, Distance::ChiSquare)?;

    let truth: Vec<&str> = test_y.iter().map(|&c| classes[c].as_str()).collect();
    for (name, model) in [("svm", Classifier::Svm(svm)), ("knn", Classifier::Knn(knn))] {
        let predicted = test_x
            .iter()
            .map(|x| model.classify(x).map(|p| classes[p.label].as_str()))
            .collect::<semloc::Result<Vec<_>>>()?;
        let report = evaluate(&predicted, &truth, &classes)?;
        println!("{name}: accuracy {:.3}, confusion {:?}", report.accuracy, report.confusion);
    }
    Ok(())
}
