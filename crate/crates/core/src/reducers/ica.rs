//! FastICA with the logcosh contrast and symmetric decorrelation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pca::fit_pca;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Return the last iterate (flagged `converged: false`) instead of an
    /// error when `max_iter` is reached.
    pub accept_unconverged: bool,
}

impl Default for IcaOptions {
    fn default() -> Self {
        IcaOptions {
            max_iter: 200,
            tol: 1e-4,
            seed: 0,
            accept_unconverged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaModel {
    pub mean: Array1<f64>,
    /// `k×d` whitening transform.
    pub whitening: Array2<f64>,
    /// `k×k` orthogonal unmixing matrix acting on whitened data.
    pub unmixing: Array2<f64>,
    /// `unmixing · whitening`.
    pub components: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl IcaModel {
    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "input has {} features, ICA was fitted on {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        let centered = x - &self.mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.components.t()))
    }
}

/// `(W Wᵀ)^{-1/2} W`.
fn symmetric_decorrelation(w: &Array2<f64>) -> Result<Array2<f64>> {
    let (vals, vecs) = linalg::symmetric_eigen(&w.dot(&w.t()).view())?;
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("unmixing matrix became singular".into()));
    }
    let scaled = &vecs * &vals.mapv(|v| 1.0 / v.sqrt()).insert_axis(Axis(0));
    Ok(scaled.dot(&vecs.t()).dot(w))
}

pub fn fit_ica(train: &ArrayView2<f64>, k: usize, opts: &IcaOptions) -> Result<IcaModel> {
    let n = train.nrows();
    if k > n.saturating_sub(1) {
        return Err(Error::InvalidParameter(format!(
            "ICA with k = {k} needs more than {k} training rows, got {n}"
        )));
    }
    let pca = fit_pca(train, k)?;
    let top = pca.explained_variance[0];
    if let Some(c) = pca.explained_variance.iter().position(|&v| !(v > top * 1e-12)) {
        return Err(Error::Numerical(format!(
            "training data has rank {c}, cannot whiten to {k} components"
        )));
    }
    let whitening = &pca.components * &pca.explained_variance.mapv(|v| 1.0 / v.sqrt()).insert_axis(Axis(1));
    // k×n whitened signals with identity sample covariance.
    let centered = train - &pca.mean.view().insert_axis(Axis(0));
    let xw = whitening.dot(&centered.t());

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = Array2::from_shape_fn((k, k), |_| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init)?;
    let nf = n as f64;
    let mut trace = Vec::new();
    for it in 1..=opts.max_iter {
        let g = w.dot(&xw).mapv(f64::tanh);
        let g_prime_mean = g.map_axis(Axis(1), |row| row.iter().map(|t| 1.0 - t * t).sum::<f64>() / nf);
        let next = g.dot(&xw.t()) / nf - &(&w * &g_prime_mean.insert_axis(Axis(1)));
        let next = symmetric_decorrelation(&next)?;
        let lim = next
            .rows()
            .into_iter()
            .zip(w.rows())
            .map(|(a, b)| (a.dot(&b).abs() - 1.0).abs())
            .fold(0.0_f64, f64::max);
        w = next;
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(lim);
        if lim < opts.tol {
            let components = w.dot(&whitening);
            return Ok(IcaModel {
                mean: pca.mean,
                whitening,
                unmixing: w,
                components,
                iterations: it,
                converged: true,
            });
        }
    }
    if opts.accept_unconverged {
        log::debug!("FastICA stopped after {} iterations, last change {:?}", opts.max_iter, trace.last());
        return Ok(IcaModel {
            mean: pca.mean,
            components: w.dot(&whitening),
            whitening,
            unmixing: w,
            iterations: opts.max_iter,
            converged: false,
        });
    }
    Err(Error::Convergence {
        solver: "FastICA",
        iterations: opts.max_iter,
        trace,
    })
}
