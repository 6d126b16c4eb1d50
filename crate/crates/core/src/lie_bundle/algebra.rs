//! The matrix model of the isometry algebras of the space forms.
//!
//! For curvature `lambda` the algebra is the image of
//! `L(D, u) = [[0, -lambda u^T], [u, D]]` inside `gl(n+1)`, with `D`
//! antisymmetric. Basis order: rotations `L(E_ab, 0)` for `a < b` in
//! lexicographic order, where `E_ab = e_a e_b^T - e_b e_a^T`, then
//! translations `L(0, e_k)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{domain, Result};
use crate::linalg::{distance_to_span, orthonormal_span, vectorize};
use crate::scalar::Real;

/// `L_lambda(D, u)` as an `(n+1) x (n+1)` matrix.
pub fn embed<T: Real>(lambda: T, d: &DMatrix<T>, u: &DVector<T>) -> DMatrix<T> {
    let n = u.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        m[(0, k + 1)] = -lambda * u[k];
        m[(k + 1, 0)] = u[k];
    }
    m.view_mut((1, 1), (n, n)).copy_from(d);
    m
}

/// Antisymmetric basis matrix `E_ab = e_a e_b^T - e_b e_a^T`.
pub fn antisym_unit<T: Real>(n: usize, a: usize, b: usize) -> DMatrix<T> {
    let mut e = DMatrix::zeros(n, n);
    e[(a, b)] = T::one();
    e[(b, a)] = -T::one();
    e
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraElement<T: Real> {
    pub lambda: T,
    pub d: DMatrix<T>,
    pub u: DVector<T>,
    pub mat: DMatrix<T>,
}

impl<T: Real> AlgebraElement<T> {
    /// Builds `L_lambda(d, u)`; `d` must be exactly antisymmetric.
    pub fn new(lambda: T, d: DMatrix<T>, u: DVector<T>) -> Result<Self> {
        let n = u.len();
        if d.nrows() != n || d.ncols() != n {
            return Err(crate::Error::Shape(format!(
                "rotation block is {}x{}, translation has length {n}",
                d.nrows(),
                d.ncols()
            )));
        }
        if (&d + d.transpose()).iter().any(|x| *x != T::zero()) {
            return Err(domain("rotation block is not antisymmetric"));
        }
        let mat = embed(lambda, &d, &u);
        Ok(Self { lambda, d, u, mat })
    }

    pub fn rotation(lambda: T, n: usize, a: usize, b: usize) -> Self {
        Self::new(lambda, antisym_unit(n, a, b), DVector::zeros(n)).expect("unit rotation")
    }

    pub fn translation(lambda: T, n: usize, k: usize) -> Self {
        let mut u = DVector::zeros(n);
        u[k] = T::one();
        Self::new(lambda, DMatrix::zeros(n, n), u).expect("unit translation")
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgebraBasis<T: Real> {
    pub lambda: T,
    pub elements: Vec<AlgebraElement<T>>,
}

impl<T: Real> AlgebraBasis<T> {
    pub fn matrices(&self) -> Vec<DMatrix<T>> {
        self.elements.iter().map(|e| e.mat.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Smallest singular value of the stacked, flattened basis.
    pub fn min_singular_value(&self) -> T {
        let cols = stack_columns(&self.matrices());
        crate::linalg::rank_info(&cols, T::zero()).2
    }
}

/// `½ n(n+1)` generators of the curvature-`lambda` algebra.
pub fn algebra_basis<T: Real>(lambda: T, n: usize) -> Result<AlgebraBasis<T>> {
    if n < 2 {
        return Err(domain(format!("dimension n = {n} must be at least 2")));
    }
    let mut elements = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            elements.push(AlgebraElement::rotation(lambda, n, a, b));
        }
    }
    for k in 0..n {
        elements.push(AlgebraElement::translation(lambda, n, k));
    }
    Ok(AlgebraBasis { lambda, elements })
}

/// The diagonal form preserved by the curvature-`lambda` group (`lambda != 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticForm<T: Real> {
    pub lambda: T,
    pub matrix: DMatrix<T>,
}

impl<T: Real> QuadraticForm<T> {
    /// `(positive, negative)` counts of the diagonal.
    pub fn signature(&self) -> (usize, usize) {
        let d = self.matrix.diagonal();
        let pos = d.iter().filter(|x| **x > T::zero()).count();
        let neg = d.iter().filter(|x| **x < T::zero()).count();
        (pos, neg)
    }
}

pub fn eta_form<T: Real>(lambda: T, n: usize) -> Result<QuadraticForm<T>> {
    if n < 2 {
        return Err(domain(format!("dimension n = {n} must be at least 2")));
    }
    if lambda == T::zero() {
        return Err(domain("eta is undefined at lambda = 0"));
    }
    let root = lambda.abs().sqrt();
    let head = if lambda > T::zero() {
        T::one() / root
    } else {
        -T::one() / root
    };
    let mut diag = DVector::from_element(n + 1, root);
    diag[0] = head;
    Ok(QuadraticForm {
        lambda,
        matrix: DMatrix::from_diagonal(&diag),
    })
}

/// Infinitesimal invariance defect of `x`:
/// `|x^T eta + eta x|` for `lambda != 0`, and
/// `|first row| + |D + D^T|` (lower-right block `D`) for `lambda = 0`.
pub fn invariance_residual<T: Real>(x: &DMatrix<T>, lambda: T) -> T {
    let n = x.nrows() - 1;
    if lambda == T::zero() {
        let row = x.row(0).norm();
        let d = x.view((1, 1), (n, n)).clone_owned();
        row + (&d + d.transpose()).norm()
    } else {
        let eta = eta_form(lambda, n.max(2)).expect("nonzero lambda").matrix;
        (x.transpose() * &eta + &eta * x).norm()
    }
}

pub(crate) fn stack_columns<T: Real>(mats: &[DMatrix<T>]) -> DMatrix<T> {
    let rows = mats.first().map(|m| m.len()).unwrap_or(0);
    let mut out = DMatrix::zeros(rows, mats.len());
    for (j, m) in mats.iter().enumerate() {
        out.set_column(j, &vectorize(m));
    }
    out
}

/// Largest least-squares residual of `[X_i, X_j]` against the span of the
/// given matrices. Zero exactly when the span is closed under the bracket.
pub fn bracket_closure_residual_of<T: Real>(mats: &[DMatrix<T>]) -> T {
    let q = orthonormal_span(&stack_columns(mats), T::lit(1e-12));
    let mut worst = T::zero();
    for i in 0..mats.len() {
        for j in (i + 1)..mats.len() {
            let c = &mats[i] * &mats[j] - &mats[j] * &mats[i];
            let r = distance_to_span(&q, &vectorize(&c));
            if r > worst {
                worst = r;
            }
        }
    }
    worst
}

pub fn bracket_closure_residual<T: Real>(basis: &AlgebraBasis<T>) -> T {
    bracket_closure_residual_of(&basis.matrices())
}

/// Matrix commutator.
pub fn commutator<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_values() {
        let e = eta_form(1.0f64, 2).unwrap();
        assert_eq!(e.matrix, DMatrix::identity(3, 3));
        let e = eta_form(4.0f64, 2).unwrap();
        assert_eq!(e.matrix.diagonal().as_slice(), &[0.5, 2.0, 2.0]);
        assert_eq!(e.signature(), (3, 0));
        let e = eta_form(-1.0f64, 2).unwrap();
        assert_eq!(e.matrix.diagonal().as_slice(), &[-1.0, 1.0, 1.0]);
        assert_eq!(e.signature(), (2, 1));
        assert!(eta_form(0.0f64, 2).is_err());
        assert!(eta_form(1.0f64, 1).is_err());
    }

    #[test]
    fn basis_sizes_and_invariance() {
        for &(lambda, n) in &[(0.0f64, 2usize), (1.0, 3), (-2.0, 2), (0.5, 4)] {
            let b = algebra_basis(lambda, n).unwrap();
            assert_eq!(b.len(), n * (n + 1) / 2);
            assert!(b.min_singular_value() > 0.5);
            for e in &b.elements {
                assert!(invariance_residual(&e.mat, lambda) < 1e-13);
                if lambda == 0.0 {
                    assert!(e.mat.row(0).iter().all(|x| *x == 0.0));
                }
            }
        }
    }

    #[test]
    fn invariance_examples() {
        let r = AlgebraElement::<f64>::rotation(1.0, 2, 0, 1);
        assert_eq!(invariance_residual(&r.mat, 1.0), 0.0);
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((invariance_residual(&id, 1.0) - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        let t = AlgebraElement::<f64>::translation(-1.0, 2, 0);
        assert!(invariance_residual(&t.mat, -1.0) < 1e-15);
    }

    #[test]
    fn rejects_non_antisymmetric_block() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(AlgebraElement::new(1.0f64, d, DVector::zeros(2)).is_err());
    }

    #[test]
    fn closure_examples() {
        let b0 = algebra_basis(0.0f64, 2).unwrap();
        assert!(bracket_closure_residual(&b0) < 1e-14);
        let b1 = algebra_basis(1.0f64, 2).unwrap();
        assert!(bracket_closure_residual(&b1) < 1e-13);

        let mut broken = b1.matrices();
        broken[1] = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, -0.7, 0.5, -0.2, 0.5, 0.4]);
        assert!(bracket_closure_residual_of(&broken) > 0.1);
    }

    #[test]
    fn single_precision_basis() {
        let b = algebra_basis(1.0f32, 3).unwrap();
        assert!(bracket_closure_residual(&b) < 1e-5);
    }
}
