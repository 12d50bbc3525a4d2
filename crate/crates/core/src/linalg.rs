//! Dense linear-algebra helpers shared by the spectral, reduction and graph
//! learning code. Heavy factorizations are delegated to `faer`; everything
//! else stays in `ndarray`.

use faer::prelude::SpSolver;
use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: &ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m.read(i, j))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest absolute entry of `a - aᵀ`.
pub fn asymmetry(a: &ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix. Eigenvalues are returned in
/// ascending order with eigenvectors as the matching columns.
pub(crate) fn symmetric_eigen(a: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    let m = to_faer(a);
    let eig = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(i).total_cmp(&s.read(j)));
    let values = Array1::from_iter(order.iter().map(|&k| s.read(k)));
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u.read(i, order[j]));
    if values.iter().any(|v| !v.is_finite()) || vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "symmetric eigensolver produced non-finite output for a {n}x{n} matrix"
        )));
    }
    Ok((values, vectors))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub(crate) fn spd_solve(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let fa = to_faer(a);
    let chol = fa
        .cholesky(Side::Lower)
        .map_err(|_| Error::Numerical("matrix is not positive definite".into()))?;
    let x = chol.solve(to_faer(b).as_ref());
    Ok(from_faer(x.as_ref()))
}

/// Sample covariance of the columns of `x` (rows are observations),
/// denominator `n - 1`.
pub(crate) fn column_covariance(x: &ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean.insert_axis(Axis(0));
    let denom = (n.max(2) - 1) as f64;
    centered.t().dot(&centered) / denom
}

/// Mean and population standard deviation of each column.
pub(crate) fn column_mean_std(x: &ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let mut var = Array1::<f64>::zeros(x.ncols());
    for row in x.rows() {
        for ((v, &xi), &mi) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            let d = xi - mi;
            *v += d * d;
        }
    }
    (mean, var.mapv(|v| (v / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a.view()).unwrap();
        assert_eq!(vals.to_vec(), vec![1.0, 2.0, 3.0]);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_recovers_rhs() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x = spd_solve(&a.view(), &b.view()).unwrap();
        let back = a.dot(&x);
        assert!(max_abs_diff(&back.view(), &b.view()) < 1e-12);
    }

    #[test]
    fn covariance_uses_unbiased_denominator() {
        let x = array![[1.0, 2.0], [3.0, 6.0]];
        let c = column_covariance(&x.view());
        assert!((c[[0, 0]] - 2.0).abs() < 1e-12);
        assert!((c[[0, 1]] - 4.0).abs() < 1e-12);
    }
}
