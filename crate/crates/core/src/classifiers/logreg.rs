//! L1-penalized logistic regression by proximal gradient descent with
//! backtracking. Objective: `mean_i log(1 + exp(-y_i (w·x_i + b))) + λ‖w‖₁`;
//! the bias is not penalized. Averaging the loss makes the solution
//! invariant to duplicating every training row.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};

pub(crate) struct LogRegFit {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub(crate) const OBJECTIVE_TOL: f64 = 1e-7;

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn loss(x: &ArrayView2<f64>, y: &[f64], w: &Array1<f64>, b: f64) -> f64 {
    let m = x.dot(w);
    m.iter().zip(y).map(|(mi, yi)| log1p_exp(-yi * (mi + b))).sum::<f64>() / y.len() as f64
}

fn gradient(x: &ArrayView2<f64>, y: &[f64], w: &Array1<f64>, b: f64) -> (Array1<f64>, f64) {
    let m = x.dot(w);
    // d/dm log(1 + exp(-y m)) = -y σ(-y m)
    let r = Array1::from_iter(m.iter().zip(y).map(|(mi, yi)| {
        let t = yi * (mi + b);
        -yi / (1.0 + t.exp())
    }));
    let n = y.len() as f64;
    (x.t().dot(&r) / n, r.sum() / n)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub(crate) fn train(x: &ArrayView2<f64>, y: &[f64], lambda: f64, max_iter: usize) -> Result<LogRegFit> {
    let d = x.ncols();
    let mut w = Array1::<f64>::zeros(d);
    let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
    let neg = y.len() as f64 - pos;
    let mut b = (pos / neg).ln();
    let objective = |w: &Array1<f64>, b: f64| loss(x, y, w, b) + lambda * w.iter().map(|v| v.abs()).sum::<f64>();
    let mut f = objective(&w, b);
    let mut step = 1.0;
    let mut trace = vec![f];
    for it in 1..=max_iter {
        let smooth = loss(x, y, &w, b);
        let (gw, gb) = gradient(x, y, &w, b);
        let (w_new, b_new, f_new) = loop {
            let w_try = Array1::from_iter(
                w.iter()
                    .zip(gw.iter())
                    .map(|(wi, gi)| soft_threshold(wi - step * gi, step * lambda)),
            );
            let b_try = b - step * gb;
            let dw = &w_try - &w;
            let db = b_try - b;
            let quad = smooth + gw.dot(&dw) + gb * db + (dw.dot(&dw) + db * db) / (2.0 * step);
            let s_try = loss(x, y, &w_try, b_try);
            if s_try <= quad + 1e-12 * quad.abs() || step < 1e-14 {
                let f_try = s_try + lambda * w_try.iter().map(|v| v.abs()).sum::<f64>();
                break (w_try, b_try, f_try);
            }
            step *= 0.5;
        };
        let change = (f - f_new).abs() / f.abs().max(1e-12);
        w = w_new;
        b = b_new;
        f = f_new;
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(f);
        if change < OBJECTIVE_TOL {
            return Ok(LogRegFit {
                weights: w,
                bias: b,
                iterations: it,
            });
        }
        step *= 2.0;
    }
    Err(Error::Convergence {
        solver: "L1 logistic regression",
        iterations: max_iter,
        trace,
    })
}
