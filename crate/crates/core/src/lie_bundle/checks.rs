//! Seeded numerical checks of the bundle structure, shared by the test
//! suite and the command-line verifier.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::algebra::{algebra_basis, antisym_unit, bracket_closure_residual, invariance_residual};
use super::group::{group_membership_residual, section, GroupWord};
use super::reductive::ReductivePair;
use crate::error::Result;
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    pub lambda: f64,
    pub n: usize,
    pub basis_len: usize,
    pub closure_residual: f64,
    pub invariance_residual: f64,
}

/// Bracket closure and `eta`-invariance of the algebra basis.
pub fn closure_check<T: Real>(lambda: T, n: usize) -> Result<ClosureReport> {
    let basis = algebra_basis(lambda, n)?;
    let invariance = basis
        .matrices()
        .iter()
        .map(|m| invariance_residual(m, lambda).to_f64_lossy())
        .fold(0.0, f64::max);
    Ok(ClosureReport {
        lambda: lambda.to_f64_lossy(),
        n,
        basis_len: basis.len(),
        closure_residual: bracket_closure_residual(&basis).to_f64_lossy(),
        invariance_residual: invariance,
    })
}

/// The word `exp(L(alpha E_12, 0)) exp(L(0, beta e_1))` built at curvature 1,
/// and the element it represents there in closed form.
pub fn two_letter_word<T: Real>(n: usize, alpha: T, beta: T) -> Result<(GroupWord<T>, DMatrix<T>)> {
    let d = antisym_unit::<T>(n, 0, 1) * alpha;
    let mut u = DVector::zeros(n);
    u[0] = beta;
    let word = GroupWord::new(
        vec![(d, DVector::zeros(n)), (DMatrix::zeros(n, n), u)],
        T::one(),
    )?;
    let mut rot = DMatrix::identity(n + 1, n + 1);
    rot[(1, 1)] = alpha.cos();
    rot[(1, 2)] = alpha.sin();
    rot[(2, 1)] = -alpha.sin();
    rot[(2, 2)] = alpha.cos();
    let mut boost = DMatrix::identity(n + 1, n + 1);
    boost[(0, 0)] = beta.cos();
    boost[(0, 1)] = -beta.sin();
    boost[(1, 0)] = beta.sin();
    boost[(1, 1)] = beta.cos();
    Ok((word, rot * boost))
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionReport {
    pub lambdas: Vec<f64>,
    pub membership_residuals: Vec<f64>,
    pub max_membership_residual: f64,
    /// Distance between the section at the base parameter and the element
    /// it was built from.
    pub base_residual: f64,
}

pub fn section_check<T: Real>(
    word: &GroupWord<T>,
    target: &DMatrix<T>,
    lambdas: &[T],
) -> SectionReport {
    let residuals: Vec<f64> = lambdas
        .iter()
        .map(|&l| group_membership_residual(&section(word, l), l).to_f64_lossy())
        .collect();
    SectionReport {
        lambdas: lambdas.iter().map(|l| l.to_f64_lossy()).collect(),
        max_membership_residual: residuals.iter().copied().fold(0.0, f64::max),
        membership_residuals: residuals,
        base_residual: (section(word, word.base_lambda) - target).norm().to_f64_lossy(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub lambda: f64,
    pub triples: usize,
    /// Largest entry of `[x,y] + [y,x]`; zero when antisymmetry is exact.
    pub antisymmetry: f64,
    pub max_jacobi_residual: f64,
    /// Largest distance to the undeformed bracket (meaningful at `lambda = 1`).
    pub undeformed_defect: f64,
}

pub fn deformed_bracket_check<T: Real>(
    pair: &ReductivePair<T>,
    lambda: T,
    triples: usize,
    seed: u64,
) -> Result<BracketReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        let kc: Vec<T> = (0..pair.k_basis.len())
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mc: Vec<T> = (0..pair.m_basis.len())
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        pair.combine(&kc, &mc)
    };
    let mut antisymmetry: f64 = 0.0;
    let mut jacobi: f64 = 0.0;
    let mut undeformed: f64 = 0.0;
    for _ in 0..triples {
        let (x, y, z) = (sample(&mut rng), sample(&mut rng), sample(&mut rng));
        let xy = pair.deformed_bracket(lambda, &x, &y)?;
        let yx = pair.deformed_bracket(lambda, &y, &x)?;
        antisymmetry = antisymmetry.max(xy.add(&yx).total().amax().to_f64_lossy());
        jacobi = jacobi.max(pair.jacobi_residual(lambda, &x, &y, &z)?.to_f64_lossy());
        let plain = pair.bracket(&x, &y)?;
        undeformed = undeformed.max(xy.add(&plain.neg()).norm().to_f64_lossy());
    }
    Ok(BracketReport {
        lambda: lambda.to_f64_lossy(),
        triples,
        antisymmetry,
        max_jacobi_residual: jacobi,
        undeformed_defect: undeformed,
    })
}
