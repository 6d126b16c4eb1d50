//! Group-level objects: sections built from exponential words, the
//! transversal submanifold `A` of upper-block matrices, and the sampled
//! certificate that `A` meets every fibre group only at the identity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::algebra::{algebra_basis, embed, eta_form, stack_columns};
use super::expm::expm;
use crate::error::{domain, Result};
use crate::linalg::rank_info;
use crate::scalar::Real;

/// Ordered list of `(D_i, u_i)` letters; the section at `lambda` is
/// `exp(L_lambda(D_1,u_1)) ... exp(L_lambda(D_m,u_m))`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupWord<T: Real> {
    pub letters: Vec<(DMatrix<T>, DVector<T>)>,
    pub base_lambda: T,
}

impl<T: Real> GroupWord<T> {
    pub fn new(letters: Vec<(DMatrix<T>, DVector<T>)>, base_lambda: T) -> Result<Self> {
        if letters.is_empty() {
            return Err(domain("empty group word"));
        }
        let n = letters[0].1.len();
        for (d, u) in &letters {
            if u.len() != n || d.nrows() != n || d.ncols() != n {
                return Err(crate::Error::Shape("inconsistent letter sizes".into()));
            }
            if (d + d.transpose()).iter().any(|x| *x != T::zero()) {
                return Err(domain("letter rotation block is not antisymmetric"));
            }
        }
        Ok(Self {
            letters,
            base_lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.letters[0].1.len()
    }

    /// The group element the word was built to represent.
    pub fn base_element(&self) -> DMatrix<T> {
        section(self, self.base_lambda)
    }
}

pub fn section<T: Real>(word: &GroupWord<T>, lambda: T) -> DMatrix<T> {
    let n = word.dim();
    word.letters
        .iter()
        .fold(DMatrix::identity(n + 1, n + 1), |acc, (d, u)| {
            acc * expm(&embed(lambda, d, u))
        })
}

/// Distance of `g` from the curvature-`lambda` group: `|g^T eta g - eta|`
/// for `lambda != 0`; for `lambda = 0` the block-form defect
/// `|row_0 - e_0| + |B^T B - I| + |det B - 1|`.
pub fn group_membership_residual<T: Real>(g: &DMatrix<T>, lambda: T) -> T {
    let n = g.nrows() - 1;
    if lambda == T::zero() {
        let mut row = g.row(0).clone_owned();
        row[0] -= T::one();
        let b = g.view((1, 1), (n, n)).clone_owned();
        let orth = (b.transpose() * &b - DMatrix::identity(n, n)).norm();
        row.norm() + orth + (b.determinant() - T::one()).abs()
    } else {
        let eta = eta_form(lambda, n.max(2)).expect("nonzero lambda").matrix;
        (g.transpose() * &eta * g - eta).norm()
    }
}

/// Violation of the defining equations of the fibre group written in
/// blocks `g = [[a, v^T], [w, B]]`:
/// `a v + lambda B^T w = 0`, `a^2 + lambda |w|^2 = 1`,
/// `v v^T + lambda B^T B = lambda I` for `lambda != 0`;
/// `a = 1`, `v = 0`, `B^T B = I` for `lambda = 0`.
pub fn membership_equations_residual<T: Real>(g: &DMatrix<T>, lambda: T) -> T {
    let n = g.nrows() - 1;
    let a = g[(0, 0)];
    let v = g.view((0, 1), (1, n)).transpose();
    let w = g.view((1, 0), (n, 1)).clone_owned();
    let b = g.view((1, 1), (n, n)).clone_owned();
    let ident = DMatrix::<T>::identity(n, n);
    if lambda == T::zero() {
        (a - T::one()).abs() + v.norm() + (b.transpose() * &b - ident).norm()
    } else {
        let e1 = (&v * a + b.transpose() * &w * lambda).norm();
        let e2 = (a * a + lambda * w.norm_squared() - T::one()).abs();
        let e3 = (&v * v.transpose() + b.transpose() * &b * lambda - ident * lambda).norm();
        e1 + e2 + e3
    }
}

/// Element of the transversal submanifold: `[[a, v^T], [0, B]]` with `a > 0`
/// and `B` symmetric positive-definite.
#[derive(Debug, Clone, Serialize)]
pub struct SliceElement<T: Real> {
    pub a: T,
    pub v: DVector<T>,
    pub b: DMatrix<T>,
    pub mat: DMatrix<T>,
}

impl<T: Real> SliceElement<T> {
    pub fn new(a: T, v: DVector<T>, b: DMatrix<T>) -> Result<Self> {
        let n = v.len();
        if b.nrows() != n || b.ncols() != n {
            return Err(crate::Error::Shape("B block size mismatch".into()));
        }
        if a <= T::zero() {
            return Err(domain("slice element needs a > 0"));
        }
        if (&b - b.transpose()).iter().any(|x| *x != T::zero()) {
            return Err(domain("B is not symmetric"));
        }
        let eig = b.clone().symmetric_eigenvalues();
        if eig.iter().any(|x| *x <= T::zero()) {
            return Err(domain("B is not positive-definite"));
        }
        let mut mat = DMatrix::zeros(n + 1, n + 1);
        mat[(0, 0)] = a;
        for k in 0..n {
            mat[(0, k + 1)] = v[k];
        }
        mat.view_mut((1, 1), (n, n)).copy_from(&b);
        Ok(Self { a, v, b, mat })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(T::one(), DVector::zeros(n), DMatrix::identity(n, n)).expect("identity")
    }
}

/// Basis of the complement `[[R, R^n], [0, Sym_n]]`.
pub fn complement_basis<T: Real>(n: usize) -> Vec<DMatrix<T>> {
    let dim = n + 1;
    let mut out = Vec::new();
    let unit = |r: usize, c: usize, sym: bool| {
        let mut m = DMatrix::zeros(dim, dim);
        m[(r, c)] = T::one();
        if sym {
            m[(c, r)] = T::one();
        }
        m
    };
    out.push(unit(0, 0, false));
    for k in 1..dim {
        out.push(unit(0, k, false));
    }
    for a in 1..dim {
        for b in a..dim {
            out.push(unit(a, b, true));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub lambda: f64,
    pub n: usize,
    pub rank: usize,
    pub expected_rank: usize,
    pub full_rank: bool,
    pub min_singular_value: f64,
    pub identity_residual: f64,
    pub min_off_identity_residual: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub passed: bool,
}

/// Minimum acceptable membership residual for sampled non-identity slice elements.
pub const SLICE_MARGIN: f64 = 1e-3;
/// Minimum Frobenius distance from the identity for a sample to count.
pub const SLICE_SAMPLE_OFFSET: f64 = 0.05;

fn random_slice_element<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> SliceElement<T> {
    let mut normal = || T::lit(rng.sample::<f64, _>(StandardNormal));
    let scale = T::lit(0.3);
    let a = (normal() * scale).exp();
    let v = DVector::from_fn(n, |_, _| normal() * scale);
    let raw = DMatrix::from_fn(n, n, |_, _| normal() * scale);
    let sym = (&raw + raw.transpose()) * T::lit(0.5);
    let b = expm(&sym);
    // expm of a symmetric matrix is symmetric up to round-off; restore exact symmetry.
    let b = (&b + b.transpose()) * T::lit(0.5);
    SliceElement::new(a, v, b).expect("sampled element is in the slice")
}

/// Certifies the complement condition by rank and samples the intersection
/// of the slice submanifold with the fibre group.
pub fn complement_and_slice_check<T: Real>(
    lambda: T,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    if n_samples == 0 {
        return Err(domain("need at least one sample"));
    }
    let basis = algebra_basis(lambda, n)?;
    let mut mats = basis.matrices();
    mats.extend(complement_basis::<T>(n));
    let cols = stack_columns(&mats);
    let (rank, _, smin) = rank_info(&cols, T::lit(1e-10));
    let expected_rank = (n + 1) * (n + 1);

    let identity_residual = membership_equations_residual(&SliceElement::<T>::identity(n).mat, lambda)
        + group_membership_residual(&SliceElement::<T>::identity(n).mat, lambda);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ident = DMatrix::<T>::identity(n + 1, n + 1);
    let mut min_res = f64::INFINITY;
    let mut taken = 0;
    while taken < n_samples {
        let g = random_slice_element::<T>(n, &mut rng);
        if (&g.mat - &ident).norm() < T::lit(SLICE_SAMPLE_OFFSET) {
            continue;
        }
        taken += 1;
        let r = membership_equations_residual(&g.mat, lambda).to_f64_lossy();
        min_res = min_res.min(r);
    }

    let full_rank = rank == expected_rank;
    let identity_residual = identity_residual.to_f64_lossy();
    Ok(CheckReport {
        lambda: lambda.to_f64_lossy(),
        n,
        rank,
        expected_rank,
        full_rank,
        min_singular_value: smin.to_f64_lossy(),
        identity_residual,
        min_off_identity_residual: min_res,
        n_samples,
        seed,
        passed: full_rank && identity_residual == 0.0 && min_res > SLICE_MARGIN,
    })
}
