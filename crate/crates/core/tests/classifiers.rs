mod support;

use ndarray::{array, concatenate, Array2, Axis};
use neurogsp::classifiers::{self, ClassifierSpec};
use neurogsp::dataset::Dataset;
use neurogsp::pipeline::run_pipeline;
use neurogsp::reducers::ReductionSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{knn_oracle, normal_matrix, random_coords, random_rest};

fn blobs(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> (Array2<f64>, Vec<u8>) {
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let mut x = normal_matrix(rng, n, d);
    for (mut row, &l) in x.axis_iter_mut(Axis(0)).zip(&labels) {
        row[0] += if l == 1 { shift } else { -shift };
        row[1] += if l == 1 { 0.5 * shift } else { -0.5 * shift };
    }
    (x, labels)
}

/// Duplicating a column splits its weight over two copies and so halves
/// its effective penalty: decision values move slightly, and predictions
/// only change for points right at the boundary.
#[test]
fn duplicated_feature_columns_keep_predictions_away_from_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (train, labels) = blobs(&mut rng, 200, 5, 1.0);
    let (test, _) = blobs(&mut rng, 2000, 5, 1.0);
    let dup = |x: &Array2<f64>| concatenate![Axis(1), x.view(), x.column(0).insert_axis(Axis(1))];
    let single = classifiers::fit(&ClassifierSpec::svm(), &train.view(), &labels).unwrap();
    let double = classifiers::fit(&ClassifierSpec::svm(), &dup(&train).view(), &labels).unwrap();
    let f1 = single.decision_function(&test.view()).unwrap();
    let f2 = double.decision_function(&dup(&test).view()).unwrap();
    let scale = f1.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut disagreements = 0;
    for (a, b) in f1.iter().zip(&f2) {
        if (*a >= 0.0) != (*b >= 0.0) {
            disagreements += 1;
            assert!(a.abs() < 0.1 * scale, "prediction flipped at decision value {a}");
        }
    }
    // The default penalty is strong, so the shift is visible: a few percent
    // of points, all of them near the boundary.
    assert!(disagreements <= 100, "{disagreements} of 2000 predictions changed");
    if let classifiers::TrainedClassifier::Linear { weights, .. } = &double {
        assert!((weights[0] - weights[5]).abs() < 1e-4, "copies weighted {} and {}", weights[0], weights[5]);
    }
}

#[test]
fn knn_follows_an_eight_to_seven_neighbour_split() {
    // Fifteen neighbours on a ring of radius 1 (8 of class 1, 7 of class 0),
    // and ten class-0 points further out.
    let mut train = Array2::zeros((25, 2));
    let mut labels = Vec::new();
    for i in 0..15 {
        let a = i as f64 * std::f64::consts::TAU / 15.0;
        let r = 1.0 + 0.01 * i as f64;
        train.row_mut(i).assign(&array![r * a.cos(), r * a.sin()]);
        labels.push(u8::from(i % 2 == 0));
    }
    for i in 15..25 {
        train.row_mut(i).assign(&array![5.0 + i as f64, 0.0]);
        labels.push(0);
    }
    assert_eq!(labels.iter().take(15).filter(|&&l| l == 1).count(), 8);
    let query = array![[0.0, 0.0]];
    let model = classifiers::fit(&ClassifierSpec::knn(15), &train.view(), &labels).unwrap();
    assert_eq!(model.predict(&query.view()).unwrap(), vec![1]);
    assert_eq!(knn_oracle(&train, &labels, &query, 15), vec![1]);
    // Two more class-0 points inside the ring turn the vote.
    let more = concatenate![Axis(0), train.view(), array![[0.1, 0.0], [0.0, 0.1]].view()];
    let mut more_labels = labels.clone();
    more_labels.extend([0, 0]);
    let model = classifiers::fit(&ClassifierSpec::knn(15), &more.view(), &more_labels).unwrap();
    assert_eq!(model.predict(&query.view()).unwrap(), vec![0]);
    assert_eq!(knn_oracle(&more, &more_labels, &query, 15), vec![0]);
}

#[test]
fn knn_matches_brute_force_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.gen_range(20..60);
        let train = normal_matrix(&mut rng, n, 4);
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        if !labels.contains(&0) || !labels.contains(&1) {
            continue;
        }
        let test = normal_matrix(&mut rng, 30, 4);
        for k in [1, 5, 15] {
            let model = classifiers::fit(&ClassifierSpec::knn(k), &train.view(), &labels).unwrap();
            assert_eq!(model.predict(&test.view()).unwrap(), knn_oracle(&train, &labels, &test, k));
        }
    }
}

#[test]
fn knn_distance_ties_prefer_class_zero() {
    // Four training points at the same distance from the query; with k = 3
    // the two class-0 points are taken first.
    let train = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let labels = vec![1, 0, 1, 0];
    let model = classifiers::fit(&ClassifierSpec::knn(3), &train.view(), &labels).unwrap();
    assert_eq!(model.predict(&array![[0.0, 0.0]].view()).unwrap(), vec![0]);
    let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
    let model = classifiers::fit(&ClassifierSpec::knn(3), &train.view(), &swapped).unwrap();
    assert_eq!(model.predict(&array![[0.0, 0.0]].view()).unwrap(), vec![0]);
}

#[test]
fn strong_l1_penalty_predicts_the_majority_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = normal_matrix(&mut rng, 31, 4);
    let labels: Vec<u8> = (0..31).map(|i| u8::from(i < 20)).collect();
    let model = classifiers::fit(&ClassifierSpec::logreg_l1(1e6), &x.view(), &labels).unwrap();
    match &model {
        classifiers::TrainedClassifier::Linear { weights, .. } => assert!(weights.iter().all(|&w| w == 0.0)),
        other => panic!("unexpected model {other:?}"),
    }
    assert!(model.predict(&normal_matrix(&mut rng, 10, 4).view()).unwrap().iter().all(|&p| p == 1));
}

#[test]
fn separable_blobs_are_learned_by_every_classifier() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (train, labels) = blobs(&mut rng, 200, 6, 3.0);
    let (test, truth) = blobs(&mut rng, 200, 6, 3.0);
    for spec in [ClassifierSpec::svm(), ClassifierSpec::knn(15), ClassifierSpec::logreg_l1(0.01)] {
        let model = classifiers::fit(&spec, &train.view(), &labels).unwrap();
        let acc = classifiers::accuracy(&model.predict(&test.view()).unwrap(), &truth).unwrap();
        assert!(acc > 0.95, "{:?}: {acc}", spec.kind);
    }
}

#[test]
fn random_labels_decode_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for draw in 0..3 {
        let (n, k) = (200, 50);
        let sessions: Vec<u32> = (0..n).map(|i| (i / 20) as u32 + 1).collect();
        let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        for chunk in labels.chunks_mut(20) {
            chunk.shuffle(&mut rng);
        }
        let ds = Dataset::new(
            normal_matrix(&mut rng, n, k),
            labels,
            sessions,
            random_rest(&mut rng, k, 30),
            random_coords(&mut rng, k),
            "random",
        )
        .unwrap();
        for spec in [ClassifierSpec::svm(), ClassifierSpec::knn(15), ClassifierSpec::logreg_l1(0.01)] {
            let folds = run_pipeline(&ds, None, ReductionSpec::NONE, &spec).unwrap();
            let acc = folds.iter().sum::<f64>() / folds.len() as f64;
            assert!((0.35..=0.65).contains(&acc), "draw {draw}, {:?}: {acc}", spec.kind);
        }
    }
}
