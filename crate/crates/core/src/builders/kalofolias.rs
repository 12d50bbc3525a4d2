//! Graph learning from smooth signals.
//!
//! Alternates between a smoothing step and a weight step on
//!
//! ```text
//! J(W, Y) = ‖X - Y‖²_F + β/2 · [ Σ_ij W_ij Z_ij - a Σ_i log(Σ_j W_ij) + b/2 ‖W‖²_F ]
//! ```
//!
//! where `Z_ij = ‖Y_i: - Y_j:‖²`. The bracket equals `2 tr(Yᵀ L Y)` plus the
//! log-degree barrier and a Frobenius penalty, so:
//!
//! * Y-step: `(I + βL) Y = X`, a symmetric positive-definite solve;
//! * W-step: the log-degree graph learning problem in `w` (upper triangle of
//!   `W`). For `b > 0` it is solved through its `N`-variable dual with a
//!   semismooth Newton method; for `b = 0` with a forward-backward-forward
//!   primal-dual iteration.
//!
//! Rest signals are divided by one global factor so that the mean squared
//! distance between distinct rows is 1 before learning; `a` and `b` are then
//! unit-free.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalofoliasOptions {
    pub beta: f64,
    pub log_weight: f64,
    pub sparsity_weight: f64,
    pub max_outer: usize,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub inner_tol: f64,
}

impl Default for KalofoliasOptions {
    fn default() -> Self {
        KalofoliasOptions {
            beta: 1.0,
            log_weight: 1.0,
            sparsity_weight: 1.0,
            max_outer: 20,
            outer_tol: 1e-5,
            max_inner: 3000,
            inner_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalofoliasFit {
    pub weights: Array2<f64>,
    pub laplacian: Array2<f64>,
    /// Objective after every W-step and Y-step, in order.
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Global factor the rest signals were divided by.
    pub signal_scale: f64,
}

impl KalofoliasFit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Packed strictly-upper-triangular edge vector of an `n`-vertex graph, in
/// row-major order `(0,1), (0,2), …, (n-2,n-1)`.
pub(crate) fn n_edges(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Squared Euclidean distances between rows of `y`, packed as edges.
pub(crate) fn row_sq_distances(y: &ArrayView2<f64>) -> Vec<f64> {
    let n = y.nrows();
    let gram = y.dot(&y.t());
    let mut z = Vec::with_capacity(n_edges(n));
    for i in 0..n {
        for j in (i + 1)..n {
            z.push((gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]]).max(0.0));
        }
    }
    z
}

fn degrees(w: &[f64], n: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|d| *d = 0.0);
    let mut e = 0;
    for i in 0..n {
        let mut di = 0.0;
        for j in (i + 1)..n {
            let v = w[e];
            di += v;
            out[j] += v;
            e += 1;
        }
        out[i] += di;
    }
}

/// W-step objective in packed form: `2 wᵀz - a Σ log d + b ‖w‖²`.
pub(crate) fn weight_objective(w: &[f64], z: &[f64], n: usize, a: f64, b: f64) -> f64 {
    let mut d = vec![0.0; n];
    degrees(w, n, &mut d);
    let mut lin = 0.0;
    let mut sq = 0.0;
    for (wi, zi) in w.iter().zip(z) {
        lin += wi * zi;
        sq += wi * wi;
    }
    let barrier: f64 = d
        .iter()
        .map(|&di| if di > 0.0 { di.ln() } else { f64::NEG_INFINITY })
        .sum();
    2.0 * lin - a * barrier + b * sq
}

pub(crate) struct WeightStep {
    pub w: Vec<f64>,
    pub dual: Vec<f64>,
    pub iterations: usize,
}

/// Minimizes `2 wᵀz - a Σ_i log((Sw)_i) + b ‖w‖²` over `w ≥ 0`, where `S`
/// maps edge weights to vertex degrees. `w0`/`v0` warm-start the primal and
/// dual iterates.
pub(crate) fn solve_weight_step(
    z: &[f64],
    n: usize,
    a: f64,
    b: f64,
    w0: Option<(&[f64], &[f64])>,
    max_iter: usize,
    tol: f64,
) -> Result<WeightStep> {
    let m = n_edges(n);
    let (mut w, mut v) = match w0 {
        Some((w, v)) => (w.to_vec(), v.to_vec()),
        None => (vec![1.0 / n as f64; m], vec![0.0; n]),
    };
    let norm_s = (2.0 * (n as f64 - 1.0)).sqrt();
    let mu = 2.0 * b + norm_s;
    let gamma = 0.95 / (1.0 + mu);

    let mut y = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut sw = vec![0.0; n];
    let mut ybar = vec![0.0; n];
    let mut pbar = vec![0.0; n];
    let mut sp = vec![0.0; n];
    let mut trace = Vec::new();

    for it in 1..=max_iter {
        degrees(&w, n, &mut sw);
        for i in 0..n {
            ybar[i] = v[i] + gamma * sw[i];
            pbar[i] = (ybar[i] - (ybar[i] * ybar[i] + 4.0 * a * gamma).sqrt()) / 2.0;
        }
        let mut e = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let yi = w[e] - gamma * (2.0 * b * w[e] + v[i] + v[j]);
                y[e] = yi;
                p[e] = (yi - 2.0 * gamma * z[e]).max(0.0);
                e += 1;
            }
        }
        degrees(&p, n, &mut sp);
        let mut dw = 0.0;
        let mut nw = 0.0;
        let mut e = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let q = p[e] - gamma * (2.0 * b * p[e] + pbar[i] + pbar[j]);
                let next = w[e] - y[e] + q;
                dw += (next - w[e]) * (next - w[e]);
                nw += w[e] * w[e];
                w[e] = next;
                e += 1;
            }
        }
        let mut dv = 0.0;
        let mut nv = 0.0;
        for i in 0..n {
            let qbar = pbar[i] + gamma * sp[i];
            let next = v[i] - ybar[i] + qbar;
            dv += (next - v[i]) * (next - v[i]);
            nv += v[i] * v[i];
            v[i] = next;
        }
        let rel_w = (dw / nw.max(f64::MIN_POSITIVE)).sqrt();
        let rel_v = (dv / nv.max(f64::MIN_POSITIVE)).sqrt();
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(rel_w.max(rel_v));
        if rel_w < tol && rel_v < tol {
            w.iter_mut().for_each(|x| *x = x.max(0.0));
            return Ok(WeightStep { w, dual: v, iterations: it });
        }
    }
    Err(Error::Convergence {
        solver: "graph weight step",
        iterations: max_iter,
        trace,
    })
}

/// Dual value `a Σ log λ_i - Σ_e relu(λ_i + λ_j - 2 z_e)² / 4b` (up to a
/// constant), or `-∞` outside `λ > 0`.
fn dual_value(lam: &[f64], z: &[f64], n: usize, a: f64, b: f64) -> f64 {
    if lam.iter().any(|&l| !(l > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let mut quad = 0.0;
    let mut e = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = lam[i] + lam[j] - 2.0 * z[e];
            if r > 0.0 {
                quad += r * r;
            }
            e += 1;
        }
    }
    a * lam.iter().map(|l| l.ln()).sum::<f64>() - quad / (4.0 * b)
}

/// Primal weights `w_e = relu(λ_i + λ_j - 2 z_e) / 2b` induced by a dual point.
fn primal_from_dual(lam: &[f64], z: &[f64], n: usize, b: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(z.len());
    for i in 0..n {
        for j in (i + 1)..n {
            w.push(((lam[i] + lam[j] - 2.0 * z[w.len()]) / (2.0 * b)).max(0.0));
        }
    }
    w
}

/// Same problem as [`solve_weight_step`] for `b > 0`, solved through its
/// dual, which is smooth, strictly concave and has only one variable per
/// vertex: maximize `a Σ log λ_i - Σ_e relu(λ_i + λ_j - 2 z_e)² / 4b`.
/// Semismooth Newton with backtracking; stops when every degree satisfies
/// `|λ_i d_i / a - 1| < tol`, the remaining optimality condition.
pub(crate) fn solve_weight_step_dual(
    z: &[f64],
    n: usize,
    a: f64,
    b: f64,
    lambda0: Option<&[f64]>,
    max_iter: usize,
    tol: f64,
) -> Result<WeightStep> {
    debug_assert!(b > 0.0);
    let mut lam = match lambda0 {
        Some(l) => l.to_vec(),
        None => {
            // Twice the mean distance of each vertex: starts with many active edges.
            let mut s = vec![0.0; n];
            degrees(z, n, &mut s);
            s.iter().map(|&v| (2.0 * v / (n - 1) as f64).max(1e-3)).collect()
        }
    };
    let c = 1.0 / (2.0 * b);
    let mut h = dual_value(&lam, z, n, a, b);
    let mut trace = Vec::new();
    let mut m = Array2::<f64>::zeros((n, n));
    let mut grad = Array2::<f64>::zeros((n, 1));
    for it in 1..=max_iter {
        let w = primal_from_dual(&lam, z, n, b);
        let mut d = vec![0.0; n];
        degrees(&w, n, &mut d);
        let residual = (0..n).map(|i| (lam[i] * d[i] / a - 1.0).abs()).fold(0.0, f64::max);
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(residual);
        if residual < tol {
            return Ok(WeightStep { w, dual: lam, iterations: it - 1 });
        }
        m.fill(0.0);
        let mut e = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if w[e] > 0.0 {
                    m[[i, i]] += c;
                    m[[j, j]] += c;
                    m[[i, j]] += c;
                    m[[j, i]] += c;
                }
                e += 1;
            }
        }
        for i in 0..n {
            m[[i, i]] += a / (lam[i] * lam[i]);
            grad[[i, 0]] = a / lam[i] - d[i];
        }
        let step = linalg::spd_solve(&m.view(), &grad.view())?;
        let slope: f64 = (0..n).map(|i| grad[[i, 0]] * step[[i, 0]]).sum();
        let mut t: f64 = 1.0;
        for i in 0..n {
            if step[[i, 0]] < 0.0 {
                t = t.min(0.99 * lam[i] / -step[[i, 0]]);
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = (0..n).map(|i| lam[i] + t * step[[i, 0]]).collect();
            let hc = dual_value(&cand, z, n, a, b);
            // Once the predicted gain is below rounding level of `h`, the
            // Armijo test is meaningless; take the (feasible) Newton step.
            let tiny = slope <= 1e-12 * h.abs().max(1.0) && hc.is_finite();
            if tiny || hc >= h + 1e-4 * t * slope {
                lam = cand;
                h = hc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::Convergence {
        solver: "graph weight step (dual Newton)",
        iterations: max_iter,
        trace,
    })
}

/// Smoothing step: solves `(I + βL) Y = X` for the rows of `X`.
pub fn smooth_signals(x: &ArrayView2<f64>, laplacian: &ArrayView2<f64>, beta: f64) -> Result<Array2<f64>> {
    let n = x.nrows();
    if laplacian.nrows() != n || laplacian.ncols() != n {
        return Err(Error::Dimension(format!(
            "Laplacian is {}x{}, signals have {n} rows",
            laplacian.nrows(),
            laplacian.ncols()
        )));
    }
    let mut a = laplacian.mapv(|v| beta * v);
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    linalg::spd_solve(&a.view(), x)
}

fn unpack(w: &[f64], n: usize) -> Array2<f64> {
    let mut full = Array2::zeros((n, n));
    let mut e = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            full[[i, j]] = w[e];
            full[[j, i]] = w[e];
            e += 1;
        }
    }
    full
}

fn joint_objective(x: &ArrayView2<f64>, y: &ArrayView2<f64>, w: &[f64], opts: &KalofoliasOptions) -> f64 {
    let n = x.nrows();
    let fit: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let z = row_sq_distances(y);
    fit + 0.5 * opts.beta * weight_objective(w, &z, n, opts.log_weight, opts.sparsity_weight)
}

/// Learns a graph whose Laplacian makes the rows of `x` (vertices × samples)
/// smooth.
pub fn learn_graph(x: &ArrayView2<f64>, opts: &KalofoliasOptions) -> Result<KalofoliasFit> {
    let n = x.nrows();
    if n < 2 || x.ncols() < 2 {
        return Err(Error::Dimension(format!("need at least 2x2 signals, got {}x{}", n, x.ncols())));
    }
    if !(opts.beta > 0.0 && opts.log_weight > 0.0 && opts.sparsity_weight >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta > 0, log weight > 0, sparsity weight >= 0 (got {}, {}, {})",
            opts.beta, opts.log_weight, opts.sparsity_weight
        )));
    }
    let z0 = row_sq_distances(x);
    let mean_z = z0.iter().sum::<f64>() / z0.len() as f64;
    if !(mean_z > 0.0 && mean_z.is_finite()) {
        return Err(Error::Data("all rest signals are identical".into()));
    }
    let scale = mean_z.sqrt();
    let x = x.mapv(|v| v / scale);

    let mut y = x.clone();
    let mut z = row_sq_distances(&y.view());
    let mut state: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut inner_total = 0;
    let mut outer = 0;
    let mut converged = false;

    while outer < opts.max_outer {
        outer += 1;
        let step = if opts.sparsity_weight > 0.0 {
            solve_weight_step_dual(
                &z,
                n,
                opts.log_weight,
                opts.sparsity_weight,
                state.as_ref().map(|(_, lam)| lam.as_slice()),
                opts.max_inner,
                opts.inner_tol,
            )?
        } else {
            solve_weight_step(
                &z,
                n,
                opts.log_weight,
                opts.sparsity_weight,
                state.as_ref().map(|(w, v)| (w.as_slice(), v.as_slice())),
                opts.max_inner,
                opts.inner_tol,
            )?
        };
        inner_total += step.iterations;
        let j_w = joint_objective(&x.view(), &y.view(), &step.w, opts);
        let prev = trace.last().copied();
        match prev {
            // An inexact weight step that does not improve is discarded.
            Some(p) if j_w > p => {}
            _ => {
                trace.push(j_w);
                state = Some((step.w, step.dual));
            }
        }
        let w = &state.as_ref().expect("set on first pass").0;
        let lap = crate::graph::laplacian(&unpack(w, n).view())?;
        let y_next = smooth_signals(&x.view(), &lap.view(), opts.beta)?;
        let j_y = joint_objective(&x.view(), &y_next.view(), w, opts);
        let before = *trace.last().expect("non-empty");
        if j_y <= before {
            y = y_next;
            z = row_sq_distances(&y.view());
            trace.push(j_y);
        }
        let after = *trace.last().expect("non-empty");
        if let Some(p) = prev {
            if (p - after).abs() <= opts.outer_tol * p.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        let keep = trace.len().saturating_sub(10);
        return Err(Error::Convergence {
            solver: "graph learning",
            iterations: outer,
            trace: trace[keep..].to_vec(),
        });
    }
    for pair in trace.windows(2) {
        if pair[1] > pair[0] {
            return Err(Error::Numerical(format!(
                "graph learning objective increased from {} to {}",
                pair[0], pair[1]
            )));
        }
    }
    let (w, _) = state.expect("at least one weight step");
    let weights = unpack(&w, n);
    let laplacian = crate::graph::laplacian(&weights.view())?;
    Ok(KalofoliasFit {
        weights,
        laplacian,
        objective_trace: trace,
        outer_iterations: outer,
        inner_iterations: inner_total,
        signal_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn packed_distances() {
        let y = array![[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]];
        assert_eq!(row_sq_distances(&y.view()), vec![25.0, 1.0, 18.0]);
    }

    #[test]
    fn weight_step_is_kkt_stationary() {
        // At the optimum, every active edge satisfies
        // 2 z_e + 2 b w_e - a/d_i - a/d_j = 0, inactive edges have gradient >= 0.
        let z = vec![0.1, 2.0, 0.5, 1.0, 0.3, 0.8];
        let (a, b) = (1.0, 0.5);
        let s = solve_weight_step(&z, 4, a, b, None, 20000, 1e-10).unwrap();
        let mut d = vec![0.0; 4];
        degrees(&s.w, 4, &mut d);
        let mut e = 0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let g = 2.0 * z[e] + 2.0 * b * s.w[e] - a / d[i] - a / d[j];
                if s.w[e] > 1e-8 {
                    assert!(g.abs() < 1e-5, "edge {e}: gradient {g}");
                } else {
                    assert!(g > -1e-5, "edge {e}: gradient {g}");
                }
                e += 1;
            }
        }
    }

    #[test]
    fn dual_newton_matches_primal_dual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let z: Vec<f64> = (0..n_edges(n)).map(|_| rng.gen_range(0.5..1.5)).collect();
        for (a, b) in [(1.0, 1.0), (0.1, 0.1), (0.5, 0.05)] {
            let pd = solve_weight_step(&z, n, a, b, None, 200_000, 1e-12).unwrap();
            let nt = solve_weight_step_dual(&z, n, a, b, None, 100, 1e-10).unwrap();
            let diff = pd.w.iter().zip(&nt.w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-6, "a={a} b={b}: max weight difference {diff}");
        }
    }

    #[test]
    fn tiny_beta_smoothing_is_identity() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 0.0, -1.0], [2.0, 2.0, 2.0]];
        let l = array![[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        let y = smooth_signals(&x.view(), &l.view(), 1e-12).unwrap();
        assert!(linalg::max_abs_diff(&x.view(), &y.view()) < 1e-8);
    }
}
