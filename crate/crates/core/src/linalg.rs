//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Column-major flattening of a matrix.
pub fn vectorize<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// Orthonormal basis (Euclidean) of the column span of `cols`, dropping
/// directions whose singular value falls below `rel_tol * sigma_max`.
pub fn orthonormal_span<T: Real>(cols: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    if cols.ncols() == 0 {
        return DMatrix::zeros(cols.nrows(), 0);
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd
        .singular_values
        .iter()
        .fold(T::zero(), |a, &b| if b > a { b } else { a });
    if smax == T::zero() {
        return DMatrix::zeros(cols.nrows(), 0);
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * smax)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(cols.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Euclidean distance from `target` to the span of the orthonormal columns `q`.
pub fn distance_to_span<T: Real>(q: &DMatrix<T>, target: &DVector<T>) -> T {
    if q.ncols() == 0 {
        return target.norm();
    }
    let coeffs = q.transpose() * target;
    (target - q * coeffs).norm()
}

/// Numerical rank with a relative singular-value threshold, plus the
/// extreme singular values.
pub fn rank_info<T: Real>(m: &DMatrix<T>, rel_tol: T) -> (usize, T, T) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (0, T::zero(), T::zero());
    }
    let s = m.clone().singular_values();
    let smax = s.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    let smin = s.iter().fold(smax, |a, &b| if b < a { b } else { a });
    let rank = s.iter().filter(|&&x| x > rel_tol * smax).count();
    (rank, smax, smin)
}

pub fn frobenius_antisym_defect<T: Real>(m: &DMatrix<T>) -> T {
    (m + m.transpose()).norm()
}
