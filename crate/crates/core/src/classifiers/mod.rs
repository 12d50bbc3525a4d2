//! Binary classifiers for condition decoding: linear SVM, k-nearest
//! neighbours and L1-penalized logistic regression.
//!
//! Labels are `0`/`1`. Linear models predict class 1 when the decision value
//! is `≥ 0`.

mod logreg;
mod svm;

use std::cmp::Ordering;
use std::hash::Hasher;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassifierKind {
    LinearSvm,
    Knn,
    LogregL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Weight of the mean hinge loss against `½‖w‖²`.
    pub c: f64,
    pub k_neighbors: usize,
    /// Weight of `‖w‖₁` against the mean logistic loss. For standardized
    /// features any value above ½ zeroes every weight, since the loss
    /// gradient at `w = 0` is bounded by `½ max|mean(y x)| ≤ ½`.
    pub l1_strength: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::LinearSvm,
            c: 1.0,
            k_neighbors: 15,
            l1_strength: 0.01,
            max_iter: 5000,
            seed: 0,
        }
    }
}

impl ClassifierSpec {
    pub fn svm() -> Self {
        ClassifierSpec::default()
    }

    pub fn knn(k: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Knn,
            k_neighbors: k,
            ..ClassifierSpec::default()
        }
    }

    pub fn logreg_l1(strength: f64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::LogregL1,
            l1_strength: strength,
            ..ClassifierSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.l1_strength > 0.0) || self.k_neighbors == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!("invalid classifier settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    Linear {
        kind: ClassifierKind,
        weights: Array1<f64>,
        bias: f64,
    },
    Knn {
        k: usize,
        train: Array2<f64>,
        labels: Vec<u8>,
        /// Per-row feature hash used as the last distance-tie key.
        row_keys: Vec<u64>,
    },
}

fn to_signed(labels: &[u8]) -> Result<Vec<f64>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| match l {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            other => Err(Error::Data(format!("label {other} at row {i} is not binary"))),
        })
        .collect()
}

fn row_key(row: &ArrayView1<f64>) -> u64 {
    let mut h = Fnv64::default();
    for v in row {
        h.write_u64(v.to_bits());
    }
    h.finish()
}

/// FNV-1a; stable across platforms and releases.
struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

pub fn fit(spec: &ClassifierSpec, train: &ArrayView2<f64>, labels: &[u8]) -> Result<TrainedClassifier> {
    spec.validate()?;
    let n = train.nrows();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} training rows", labels.len())));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("training matrix has non-finite values".into()));
    }
    let y = to_signed(labels)?;
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Data("training set contains a single class".into()));
    }
    // Linear solvers visit rows in a canonical order (feature hash, then
    // label) so that the fitted model does not depend on row order.
    let canonical = || {
        let keys: Vec<u64> = train.rows().into_iter().map(|r| row_key(&r)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (keys[i], labels[i]));
        let x = train.select(Axis(0), &order);
        let y: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        (x, y)
    };
    match spec.kind {
        ClassifierKind::LinearSvm => {
            let (train, y) = canonical();
            let f = svm::train(&train.view(), &y, spec.c, spec.max_iter)?;
            log::trace!("linear SVM converged after {} sweeps", f.sweeps);
            Ok(TrainedClassifier::Linear {
                kind: spec.kind,
                weights: f.weights,
                bias: f.bias,
            })
        }
        ClassifierKind::LogregL1 => {
            let (train, y) = canonical();
            let f = logreg::train(&train.view(), &y, spec.l1_strength, spec.max_iter)?;
            log::trace!("logistic regression converged after {} iterations", f.iterations);
            Ok(TrainedClassifier::Linear {
                kind: spec.kind,
                weights: f.weights,
                bias: f.bias,
            })
        }
        ClassifierKind::Knn => Ok(TrainedClassifier::Knn {
            k: spec.k_neighbors.min(n),
            train: train.to_owned(),
            labels: labels.to_vec(),
            row_keys: train.rows().into_iter().map(|r| row_key(&r)).collect(),
        }),
    }
}

impl TrainedClassifier {
    pub fn n_features(&self) -> usize {
        match self {
            TrainedClassifier::Linear { weights, .. } => weights.len(),
            TrainedClassifier::Knn { train, .. } => train.ncols(),
        }
    }

    /// Affine decision values of a linear model.
    pub fn decision_function(&self, test: &ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check(test)?;
        match self {
            TrainedClassifier::Linear { weights, bias, .. } => Ok(test.dot(weights) + *bias),
            TrainedClassifier::Knn { .. } => Err(Error::InvalidParameter(
                "nearest-neighbour models have no decision function".into(),
            )),
        }
    }

    pub fn predict(&self, test: &ArrayView2<f64>) -> Result<Vec<u8>> {
        self.check(test)?;
        match self {
            TrainedClassifier::Linear { .. } => Ok(self
                .decision_function(test)?
                .iter()
                .map(|&v| u8::from(v >= 0.0))
                .collect()),
            TrainedClassifier::Knn {
                k,
                train,
                labels,
                row_keys,
            } => Ok(test
                .rows()
                .into_iter()
                .map(|row| knn_vote(&row, *k, train, labels, row_keys))
                .collect()),
        }
    }

    fn check(&self, test: &ArrayView2<f64>) -> Result<()> {
        if test.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "test rows have {} features, model expects {}",
                test.ncols(),
                self.n_features()
            )));
        }
        Ok(())
    }
}

fn knn_vote(row: &ArrayView1<f64>, k: usize, train: &Array2<f64>, labels: &[u8], keys: &[u64]) -> u8 {
    let mut cand: Vec<(f64, u8, u64)> = train
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let d: f64 = t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, labels[i], keys[i])
        })
        .collect();
    let cmp = |a: &(f64, u8, u64), b: &(f64, u8, u64)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    let ones = cand.iter().filter(|c| c.1 == 1).count();
    u8::from(2 * ones > cand.len())
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
