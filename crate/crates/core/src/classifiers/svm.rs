//! L2-regularized hinge-loss SVM trained by dual coordinate descent.
//!
//! Objective: `½‖w‖² + C · mean_i max(0, 1 − y_i (w·x_i + b))`. Averaging the
//! loss makes the solution invariant to duplicating every training row. The
//! bias is learned as the weight of an appended constant feature, so it is
//! regularized together with the other weights.
//!
//! The duality-gap tolerance is tight enough that solutions reached along
//! different coordinate paths (row orders, duplicated rows) agree to about
//! `1e-4` in the weights.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};

pub(crate) struct SvmFit {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub sweeps: usize,
}

/// Relative duality gap at which training stops.
pub(crate) const GAP_TOL: f64 = 1e-8;
/// Relative change of the primal objective between checks at which
/// training also stops.
pub(crate) const PLATEAU_TOL: f64 = 1e-10;
const CHECK_EVERY: usize = 5;

fn primal_dual(x: &ArrayView2<f64>, y: &[f64], w: &[f64], alpha: &[f64], c: f64) -> (f64, f64) {
    let d = x.ncols();
    let wn: f64 = w.iter().map(|v| v * v).sum();
    let mut hinge = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut m = w[d];
        for (a, b) in row.iter().zip(w) {
            m += a * b;
        }
        hinge += (1.0 - y[i] * m).max(0.0);
    }
    let primal = 0.5 * wn + c * hinge / x.nrows() as f64;
    let dual = alpha.iter().sum::<f64>() - 0.5 * wn;
    (primal, dual)
}

/// `y` holds ±1 labels.
pub(crate) fn train(x: &ArrayView2<f64>, y: &[f64], c: f64, max_sweeps: usize) -> Result<SvmFit> {
    let (n, d) = x.dim();
    // w[d] is the bias weight.
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).collect();
    // Box constraint of the dual of the averaged loss.
    let upper = c / n as f64;
    let mut trace: Vec<f64> = Vec::new();
    for sweep in 1..=max_sweeps {
        for i in 0..n {
            let row = x.row(i);
            let mut m = w[d];
            for (a, b) in row.iter().zip(&w) {
                m += a * b;
            }
            let g = y[i] * m - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, upper);
                let delta = (alpha[i] - old) * y[i];
                for (wj, a) in w.iter_mut().zip(row.iter()) {
                    *wj += delta * a;
                }
                w[d] += delta;
            }
        }
        if sweep % CHECK_EVERY == 0 || sweep == max_sweeps {
            let (p, dual) = primal_dual(x, y, &w, &alpha, c);
            let gap = (p - dual) / p.abs().max(1e-12);
            let plateau = trace
                .last()
                .is_some_and(|&prev| (prev - p).abs() <= PLATEAU_TOL * p.abs().max(1e-12));
            if trace.len() == 8 {
                trace.remove(0);
            }
            trace.push(p);
            if gap < GAP_TOL || plateau {
                let bias = w[d];
                w.truncate(d);
                return Ok(SvmFit {
                    weights: Array1::from(w),
                    bias,
                    sweeps: sweep,
                });
            }
        }
    }
    Err(Error::Convergence {
        solver: "linear SVM",
        iterations: max_sweeps,
        trace,
    })
}
