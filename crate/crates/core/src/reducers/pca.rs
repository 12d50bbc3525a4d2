use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// Principal components of the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k×d`, orthonormal rows in order of decreasing variance.
    pub components: Array2<f64>,
    /// Variance along each component (denominator `n - 1`).
    pub explained_variance: Array1<f64>,
    /// Total variance of the training data.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn explained_variance_ratio(&self) -> Array1<f64> {
        self.explained_variance.mapv(|v| v / self.total_variance)
    }

    pub fn transform(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "input has {} features, PCA was fitted on {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        let centered = x - &self.mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.components.t()))
    }

    pub fn inverse_transform(&self, z: &ArrayView2<f64>) -> Array2<f64> {
        z.dot(&self.components) + &self.mean.view().insert_axis(Axis(0))
    }
}

pub fn fit_pca(train: &ArrayView2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = train.dim();
    if n < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("k = {k} must be in [1, {d}]")));
    }
    let mean = train.mean_axis(Axis(0)).expect("non-empty");
    let centered = train - &mean.view().insert_axis(Axis(0));
    let denom = (n - 1) as f64;
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / denom;

    let mut components = Array2::zeros((k, d));
    let mut explained = Array1::zeros(k);
    if d <= n {
        let cov = centered.t().dot(&centered) / denom;
        let (vals, vecs) = linalg::symmetric_eigen(&cov.view())?;
        for c in 0..k {
            let src = d - 1 - c;
            explained[c] = vals[src].max(0.0);
            components.row_mut(c).assign(&vecs.column(src));
        }
    } else {
        // Wide data: eigenvectors of the n×n Gram matrix map to components
        // through Xᵀu / ‖Xᵀu‖.
        let gram = centered.dot(&centered.t());
        let (vals, vecs) = linalg::symmetric_eigen(&gram.view())?;
        let floor = vals[n - 1].abs() * 1e-12;
        for c in 0..k {
            let v = if c < n { vals[n - 1 - c] } else { 0.0 };
            if c < n && v > floor {
                let dir = centered.t().dot(&vecs.column(n - 1 - c));
                let norm = dir.dot(&dir).sqrt();
                components.row_mut(c).assign(&(dir / norm));
                explained[c] = v / denom;
            } else {
                // Rank-deficient tail: complete the basis deterministically.
                let basis = complete_basis(&components, c, d);
                components.row_mut(c).assign(&basis);
                explained[c] = 0.0;
            }
        }
    }
    for mut row in components.rows_mut() {
        let (mut best, mut best_abs) = (0, -1.0);
        for (i, v) in row.iter().enumerate() {
            if v.abs() > best_abs + 1e-12 {
                best_abs = v.abs();
                best = i;
            }
        }
        if row[best] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
        total_variance,
    })
}

/// Unit vector orthogonal to the first `filled` rows of `existing`, found by
/// Gram-Schmidt over the standard basis.
fn complete_basis(existing: &Array2<f64>, filled: usize, d: usize) -> Array1<f64> {
    for e in 0..d {
        let mut v = Array1::zeros(d);
        v[e] = 1.0;
        for r in 0..filled {
            let row = existing.row(r);
            let proj = row.dot(&v);
            v.scaled_add(-proj, &row);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
    unreachable!("fewer than d components are filled")
}
