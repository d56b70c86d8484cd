//! Small bridge between the `ndarray` types used in the public API and the
//! `nalgebra` factorizations used internally (eigendecomposition, QR, solves).

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_nd(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub(crate) fn symmetric_eigen_sorted(c: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    if c.nrows() != c.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "symmetric eigendecomposition needs a square matrix, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let eig = to_na(c).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors =
        Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Solves `A X = B` for square `A` via LU with partial pivoting.
pub(crate) fn solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve expects square A matching B rows, got A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let lu = to_na(a).lu();
    match lu.solve(&to_na(b)) {
        Some(x) => Ok(to_nd(&x)),
        None => Err(Error::Numerical("singular linear system".into())),
    }
}

/// Numerical rank: number of singular values above `rel_tol * s_max`.
pub(crate) fn rank(a: &Array2<f64>, rel_tol: f64) -> usize {
    let svd = to_na(a).svd(false, false);
    let s_max = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    if s_max <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > rel_tol * s_max)
        .count()
}

pub(crate) fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}
