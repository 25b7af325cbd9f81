use super::{encode, forest::DEFAULT_TREES, train_with_trees, ModelKind};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::DriverLabel;
use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub folds: usize,
    pub classes: Vec<DriverLabel>,
    /// Correct predictions over all held-out rows.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_fold_accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    /// Predicted class index of every input row.
    pub predictions: Vec<usize>,
}

/// Fold index of every row. Each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped, so folds stay balanced.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive(seed, "kfold"));
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

pub fn kfold_eval(data: &[FeatureVector], kind: ModelKind, folds: usize, seed: u64) -> Result<KFoldReport> {
    kfold_eval_with(data, kind, folds, DEFAULT_TREES, seed, |_, train| Ok(train))
}

/// Cross-validation where `prepare` may rewrite each fold's training rows
/// (for example to corrupt labels); held-out rows are scored against their
/// own labels.
pub fn kfold_eval_with<F>(
    data: &[FeatureVector],
    kind: ModelKind,
    folds: usize,
    n_trees: usize,
    seed: u64,
    mut prepare: F,
) -> Result<KFoldReport>
where
    F: FnMut(usize, Vec<FeatureVector>) -> Result<Vec<FeatureVector>>,
{
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if data.len() < folds {
        return Err(Error::InsufficientData(format!("{} samples cannot fill {folds} folds", data.len())));
    }
    let enc = encode(data)?;
    let n_classes = enc.classes.len();
    let assignment = stratified_folds(&enc.y, n_classes, folds, seed);
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut correct_total = 0usize;
    let mut predictions = vec![0usize; data.len()];
    for fold in 0..folds {
        let train_rows: Vec<FeatureVector> =
            data.iter().zip(&assignment).filter(|(_, f)| **f != fold).map(|(v, _)| v.clone()).collect();
        let train_rows = prepare(fold, train_rows)?;
        let model =
            train_with_trees(&train_rows, kind, seed::derive_indexed(seed, "kfold-model", fold as u64), n_trees)?;
        let mut correct = 0usize;
        let mut tested = 0usize;
        for (i, v) in data.iter().enumerate().filter(|(i, _)| assignment[*i] == fold) {
            let pred = model.predict_turn(v)?;
            let truth = enc.y[i];
            let predicted = enc.classes.binary_search(&pred.label).expect("model classes come from data");
            confusion[truth][predicted] += 1;
            predictions[i] = predicted;
            if predicted == truth {
                correct += 1;
            }
            tested += 1;
        }
        correct_total += correct;
        if tested > 0 {
            fold_accuracies.push(correct as f64 / tested as f64);
        }
    }
    let mean_fold_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(KFoldReport {
        folds,
        classes: enc.classes,
        accuracy: correct_total as f64 / data.len() as f64,
        fold_accuracies,
        mean_fold_accuracy,
        confusion,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turns::Direction;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn blobs(n_per: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut out = Vec::new();
        for (label, center) in [("A", 0.0), ("B", 10.0)] {
            for _ in 0..n_per {
                out.push(FeatureVector {
                    values: (0..4).map(|_| center + noise.sample(&mut rng)).collect(),
                    direction: Direction::Left,
                    label: Some(DriverLabel::new(label).unwrap()),
                });
            }
        }
        out
    }

    #[test]
    fn separable_data_is_perfect() {
        let data = blobs(30, 1);
        for kind in [ModelKind::NaiveBayes, ModelKind::RandomForest] {
            let report = kfold_eval(&data, kind, 10, 3).unwrap();
            assert_eq!(report.accuracy, 1.0);
            assert_eq!(report.confusion[0][0] + report.confusion[1][1], 60);
        }
    }

    #[test]
    fn fold_assignment_is_stratified_and_seeded() {
        let labels: Vec<usize> = (0..53).map(|i| i % 3).collect();
        let a = stratified_folds(&labels, 3, 10, 5);
        assert_eq!(a, stratified_folds(&labels, 3, 10, 5));
        assert_ne!(a, stratified_folds(&labels, 3, 10, 6));
        let mut sizes = [0usize; 10];
        for f in &a {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn shuffled_labels_sit_at_chance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let labels = ["A", "B", "C", "D", "E"];
        let data: Vec<FeatureVector> = (0..500)
            .map(|_| FeatureVector {
                values: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                direction: Direction::Right,
                label: Some(DriverLabel::new(labels[rng.random_range(0..5)]).unwrap()),
            })
            .collect();
        let report = kfold_eval(&data, ModelKind::NaiveBayes, 10, 1).unwrap();
        assert!((report.accuracy - 0.2).abs() <= 0.10, "{}", report.accuracy);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let data = blobs(3, 2);
        assert!(kfold_eval(&data, ModelKind::NaiveBayes, 10, 0).is_err());
    }
}
