//! Weighted graphs, combinatorial Laplacians and the graph Fourier transform.
//!
//! The Laplacian `L = D - W` of a symmetric nonnegative weight matrix is
//! decomposed as `L = F Λ Fᵀ` with ascending eigenvalues. Columns of `F` are
//! the graph Fourier modes; the transform of a vertex signal `x` is `Fᵀx`.
//! The first half of the spectrum is the low-frequency band, the second half
//! the high-frequency band.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `|L - Lᵀ|` accepted by [`eigendecompose`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Symmetric, nonnegative, zero-diagonal weight matrix over `N` vertices, with
/// optional per-vertex spatial coordinates in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: Array2<f64>,
    coords: Option<Array2<f64>>,
}

impl Graph {
    pub fn new(weights: Array2<f64>, coords: Option<Array2<f64>>) -> Result<Self> {
        validate_weights(&weights.view())?;
        if let Some(c) = &coords {
            if c.nrows() != weights.nrows() || c.ncols() != 3 {
                return Err(Error::Dimension(format!(
                    "coordinates are {}x{}, expected {}x3",
                    c.nrows(),
                    c.ncols(),
                    weights.nrows()
                )));
            }
        }
        Ok(Graph { weights, coords })
    }

    pub fn n_vertices(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn coords(&self) -> Option<&Array2<f64>> {
        self.coords.as_ref()
    }

    pub fn degrees(&self) -> Array1<f64> {
        self.weights.sum_axis(Axis(1))
    }

    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = self.weights.mapv(|w| -w);
        for (i, d) in self.degrees().iter().enumerate() {
            l[[i, i]] = *d;
        }
        l
    }

    /// Number of connected components, counting edges with weight > 0.
    pub fn n_components(&self) -> usize {
        let n = self.n_vertices();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[[i, j]] > 0.0 {
                    uf.union(i, j);
                }
            }
        }
        uf.count()
    }

    /// Same graph with all weights multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        Graph::new(self.weights.mapv(|w| w * c), self.coords.clone())
    }
}

fn validate_weights(w: &ArrayView2<f64>) -> Result<()> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(Error::InvalidGraph(format!(
            "weight matrix must be square and non-empty, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    for i in 0..n {
        if w[[i, i]] != 0.0 {
            return Err(Error::InvalidGraph(format!("nonzero self-loop at vertex {i}")));
        }
        for j in 0..n {
            let v = w[[i, j]];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidGraph(format!("weight ({i},{j}) = {v} is not finite and nonnegative")));
            }
            if v != w[[j, i]] {
                return Err(Error::InvalidGraph(format!("weights ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    Ok(())
}

/// `L = D - W` for a raw weight matrix, validating graph invariants first.
pub fn laplacian(weights: &ArrayView2<f64>) -> Result<Array2<f64>> {
    validate_weights(weights)?;
    let n = weights.nrows();
    let mut l = weights.mapv(|w| -w);
    for i in 0..n {
        l[[i, i]] = weights.row(i).sum();
    }
    Ok(l)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

/// Orthonormal Laplacian eigenbasis with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl Spectrum {
    pub fn n_vertices(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Columns are the Fourier modes, in eigenvalue order.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    /// Transforms every row of `signals` (observations × vertices).
    pub fn gft_rows(&self, signals: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if signals.ncols() != self.n_vertices() {
            return Err(Error::Dimension(format!(
                "signals have {} columns, graph has {} vertices",
                signals.ncols(),
                self.n_vertices()
            )));
        }
        Ok(signals.dot(&self.eigenvectors))
    }

    /// `F diag(Λ) Fᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Eigendecomposition of a symmetric (Laplacian) matrix.
///
/// Each eigenvector is sign-normalized so that its entry of largest absolute
/// value is positive, ties going to the lowest index. Eigenvalues within
/// round-off of zero are clamped to exactly zero.
pub fn eigendecompose(l: &ArrayView2<f64>) -> Result<Spectrum> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", l.nrows(), l.ncols())));
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let asym = linalg::asymmetry(l);
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidGraph(format!("matrix is not symmetric (max deviation {asym:e})")));
    }
    let (mut values, mut vectors) = linalg::symmetric_eigen(l)?;
    let scale = l.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale * n as f64;
    for v in values.iter_mut() {
        if v.abs() <= floor {
            *v = 0.0;
        }
    }
    for mut col in vectors.columns_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            // Strictly greater so that ties keep the lowest index.
            if v.abs() > best_abs + 1e-12 {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Forward transform `Fᵀx`.
pub fn gft(s: &Spectrum, x: &ArrayView1<f64>) -> Result<Array1<f64>> {
    check_len(s, x.len())?;
    Ok(s.eigenvectors.t().dot(x))
}

/// Inverse transform `F x̂`.
pub fn igft(s: &Spectrum, xhat: &ArrayView1<f64>) -> Result<Array1<f64>> {
    check_len(s, xhat.len())?;
    Ok(s.eigenvectors.dot(xhat))
}

fn check_len(s: &Spectrum, len: usize) -> Result<()> {
    if len != s.n_vertices() {
        return Err(Error::Dimension(format!(
            "signal has length {len}, graph has {} vertices",
            s.n_vertices()
        )));
    }
    Ok(())
}

/// Which half of the spectrum a band-based method works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Band {
    LF,
    HF,
}

impl Band {
    pub fn range(self, n: usize) -> FrequencyBand {
        match self {
            Band::LF => FrequencyBand::low(n),
            Band::HF => FrequencyBand::high(n),
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Band::LF => "LF",
            Band::HF => "HF",
        })
    }
}

/// Inclusive index range `[f_min, f_max]` into the ascending spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub f_min: usize,
    pub f_max: usize,
}

impl FrequencyBand {
    pub fn new(f_min: usize, f_max: usize, n: usize) -> Result<Self> {
        if f_min > f_max || f_max >= n {
            return Err(Error::InvalidParameter(format!(
                "band [{f_min}, {f_max}] is not within [0, {}]",
                n.saturating_sub(1)
            )));
        }
        Ok(FrequencyBand { f_min, f_max })
    }

    pub fn full(n: usize) -> Self {
        FrequencyBand { f_min: 0, f_max: n - 1 }
    }

    /// `[0, ⌊N/2⌋ - 1]`. Requires `N ≥ 2`.
    pub fn low(n: usize) -> Self {
        FrequencyBand { f_min: 0, f_max: n / 2 - 1 }
    }

    /// `[⌊N/2⌋, N - 1]`.
    pub fn high(n: usize) -> Self {
        FrequencyBand { f_min: n / 2, f_max: n - 1 }
    }

    pub fn len(&self) -> usize {
        self.f_max - self.f_min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
