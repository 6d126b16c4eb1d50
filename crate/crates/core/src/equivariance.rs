//! Certification of equivariant nondegeneracy, slices transversal to the
//! group orbits, and operator diagnostics.
//!
//! Everything is computed in `W^{1/2}` coordinates, where the pairing
//! becomes Euclidean and `J` becomes the symmetric `W^{1/2} J W^{-1/2}`.
//! The fibre spaces of the continuous theory (states, tangent vectors,
//! residuals, test functions) all collapse onto the same node space with
//! the pairing `W`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Pairing;
use crate::variational::{JacobiOperator, Problem, ProblemState};

/// Default minimum ratio between the smallest retained and the largest
/// kernel singular value.
pub const GAP_MIN: f64 = 1e3;
/// Default bound on principal angles between kernel and Killing–Jacobi span.
pub const ANGLE_TOL: f64 = 1e-6;
/// States with a larger residual `W`-norm are not treated as critical.
pub const CRITICAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative kernel threshold; `None` selects `1e-8 * N`.
    pub kernel_rel: Option<f64>,
    pub gap_min: f64,
    pub angle: f64,
    pub critical: f64,
    /// Relative singular-value threshold for the Killing–Jacobi rank.
    pub killing_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kernel_rel: None,
            gap_min: GAP_MIN,
            angle: ANGLE_TOL,
            critical: CRITICAL_TOL,
            killing_rel: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn kernel_rel_for(&self, dim: usize) -> f64 {
        self.kernel_rel.unwrap_or(1e-8 * dim as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelBasis {
    /// `W`-orthonormal kernel vectors.
    #[serde(serialize_with = "serialize_columns")]
    pub vectors: Vec<DVector<f64>>,
    /// Singular values below the threshold.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
    pub sigma_max: f64,
    /// Smallest retained singular value over the largest kernel one
    /// (floored at the rounding level `eps * sigma_max * N`).
    pub gap: f64,
    pub gap_ok: bool,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

fn serialize_columns<S: serde::Serializer>(
    v: &[DVector<f64>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(c.as_slice())?;
    }
    seq.end()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Nondegenerate,
    Degenerate,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    pub kernel_dim: usize,
    pub killing_rank: usize,
    pub principal_angles: Vec<f64>,
    pub max_principal_angle: f64,
    pub spectral_gap: f64,
    pub residual_norm: f64,
    pub verdict: Verdict,
    pub tolerances: Tolerances,
    pub kernel_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct SliceBasis {
    /// `W`-orthonormal columns spanning the complement of the
    /// Killing–Jacobi span.
    pub vectors: DMatrix<f64>,
    pub killing_rank: usize,
}

impl SliceBasis {
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }
}

/// Diagnostics of an assembled Jacobi operator.
///
/// Square `W`-symmetric operators always have index zero; the check is
/// kept because symmetric Fredholm operators in infinite dimensions need
/// not, and an index defect here would expose an assembly error.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub symmetry_residual: f64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub index: i64,
    pub hessian_consistency: Option<f64>,
    pub symmetric: bool,
    pub passed: bool,
}

fn to_sqrt_coords(pairing: &Pairing<f64>, v: &DVector<f64>) -> DVector<f64> {
    v.component_mul(&pairing.sqrt_weights())
}

fn from_sqrt_coords(pairing: &Pairing<f64>, y: &DVector<f64>) -> DVector<f64> {
    y.component_div(&pairing.sqrt_weights())
}

/// `W^{1/2} J W^{-1/2}`, symmetrized.
fn symmetric_form(j: &JacobiOperator) -> DMatrix<f64> {
    let s = j.pairing.sqrt_weights();
    let n = j.dim();
    let m = DMatrix::from_fn(n, n, |r, c| j.matrix[(r, c)] * s[r] / s[c]);
    (&m + m.transpose()) * 0.5
}

pub fn numerical_kernel(j: &JacobiOperator, tol_rel: f64) -> Result<KernelBasis> {
    if !(tol_rel > 0.0 && tol_rel <= 1e-2) {
        return Err(Error::Precondition(format!(
            "kernel tolerance {tol_rel} outside (0, 1e-2]"
        )));
    }
    let n = j.dim();
    if n == 0 {
        return Ok(KernelBasis {
            vectors: Vec::new(),
            singular_values: Vec::new(),
            tolerance: 0.0,
            sigma_max: 0.0,
            gap: f64::INFINITY,
            gap_ok: true,
        });
    }
    let svd = symmetric_form(j).svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let sigma_max = sv.max();
    let tolerance = tol_rel * sigma_max;
    let mut kernel = Vec::new();
    let mut small = Vec::new();
    let mut retained_min = f64::INFINITY;
    for (i, &s) in sv.iter().enumerate() {
        if s < tolerance {
            small.push(s);
            let y = v_t.row(i).transpose();
            kernel.push(from_sqrt_coords(&j.pairing, &y));
        } else {
            retained_min = retained_min.min(s);
        }
    }
    let floor = f64::EPSILON * sigma_max * n as f64;
    let kernel_max = small.iter().copied().fold(0.0, f64::max).max(floor);
    let gap = retained_min / kernel_max;
    Ok(KernelBasis {
        vectors: kernel,
        singular_values: small,
        tolerance,
        sigma_max,
        gap,
        gap_ok: gap >= GAP_MIN,
    })
}

/// Orthonormal basis (in `W^{1/2}` coordinates) of the Killing–Jacobi span.
pub(crate) fn killing_frame(
    pairing: &Pairing<f64>,
    basis: &[DVector<f64>],
    rel: f64,
) -> DMatrix<f64> {
    let n = pairing.dim();
    if basis.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let cols: Vec<DVector<f64>> = basis.iter().map(|v| to_sqrt_coords(pairing, v)).collect();
    crate::linalg::orthonormal_span(&DMatrix::from_columns(&cols), rel)
}

/// Kernel, Killing–Jacobi rank and principal angles for a given operator.
pub fn assess(
    j: &JacobiOperator,
    killing_basis: &[DVector<f64>],
    tol: &Tolerances,
    residual_norm: f64,
) -> Result<NondegeneracyReport> {
    let kernel = numerical_kernel(j, tol.kernel_rel_for(j.dim()))?;
    let frame = killing_frame(&j.pairing, killing_basis, tol.killing_rel);
    let killing_rank = frame.ncols();

    let principal_angles: Vec<f64> = if kernel.dim() == 0 {
        Vec::new()
    } else {
        let y = DMatrix::from_columns(
            &kernel
                .vectors
                .iter()
                .map(|v| to_sqrt_coords(&j.pairing, v))
                .collect::<Vec<_>>(),
        );
        let resid = &y - &frame * (frame.transpose() * &y);
        let mut sines: Vec<f64> = resid.singular_values().iter().copied().collect();
        sines.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sines.iter().map(|s| s.min(1.0).asin()).collect()
    };
    let max_principal_angle = principal_angles.iter().copied().fold(0.0, f64::max);
    let gap_ok = kernel.gap >= tol.gap_min;
    let verdict = if !gap_ok {
        Verdict::Indeterminate
    } else if kernel.dim() == killing_rank && max_principal_angle < tol.angle {
        Verdict::Nondegenerate
    } else if kernel.dim() > killing_rank {
        Verdict::Degenerate
    } else {
        Verdict::Indeterminate
    };
    Ok(NondegeneracyReport {
        kernel_dim: kernel.dim(),
        killing_rank,
        principal_angles,
        max_principal_angle,
        spectral_gap: kernel.gap,
        residual_norm,
        verdict,
        tolerances: *tol,
        kernel_tolerance: kernel.tolerance,
    })
}

pub fn nondegeneracy_report(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    tol: &Tolerances,
) -> Result<NondegeneracyReport> {
    let residual_norm = problem.residual_norm(state, lambda_hat)?;
    if !(residual_norm < tol.critical) {
        return Err(Error::Precondition(format!(
            "state is not critical: residual norm {residual_norm:e}"
        )));
    }
    let j = problem.jacobi(state, lambda_hat)?;
    let kj = problem.killing_jacobi_basis(state, lambda_hat)?;
    assess(&j, &kj, tol, residual_norm)
}

/// `W`-orthonormal complement of the Killing–Jacobi span at `state`.
pub fn slice_basis(problem: &Problem, state: &ProblemState, lambda_hat: f64) -> Result<SliceBasis> {
    let pairing = problem.pairing();
    let kj = problem.killing_jacobi_basis(state, lambda_hat)?;
    Ok(complement(&pairing, &kj, Tolerances::default().killing_rel))
}

pub(crate) fn complement(pairing: &Pairing<f64>, kj: &[DVector<f64>], rel: f64) -> SliceBasis {
    let frame = killing_frame(pairing, kj, rel);
    let n = pairing.dim();
    let projector = DMatrix::identity(n, n) - &frame * frame.transpose();
    let eig = SymmetricEigen::new(projector);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let sw = pairing.sqrt_weights();
    let vectors = DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])] / sw[r]);
    SliceBasis {
        vectors,
        killing_rank: frame.ncols(),
    }
}

/// Smallest singular value of `[Killing–Jacobi frame at state | slice]`
/// in `W^{1/2}` coordinates.
pub fn transversality_margin(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    slice: &SliceBasis,
) -> Result<f64> {
    let pairing = problem.pairing();
    let kj = problem.killing_jacobi_basis(state, lambda_hat)?;
    let frame = killing_frame(&pairing, &kj, Tolerances::default().killing_rel);
    let n = pairing.dim();
    if slice.vectors.nrows() != n {
        return Err(Error::Shape("slice does not match the state space".into()));
    }
    let sw = pairing.sqrt_weights();
    let mut stacked = DMatrix::zeros(n, frame.ncols() + slice.len());
    stacked.columns_mut(0, frame.ncols()).copy_from(&frame);
    for c in 0..slice.len() {
        for r in 0..n {
            stacked[(r, frame.ncols() + c)] = slice.vectors[(r, c)] * sw[r];
        }
    }
    if stacked.ncols() == 0 {
        return Ok(1.0);
    }
    if stacked.ncols() > n {
        // more columns than dimensions: the union cannot be a direct sum
        return Ok(0.0);
    }
    Ok(stacked.singular_values().min())
}

/// Symmetry residual and index check of `J`.
pub fn operator_diagnostics(j: &JacobiOperator) -> DiagnosticsReport {
    let wj = j.weighted();
    let norm = wj.norm();
    let symmetry_residual = if norm > 0.0 {
        (&wj - wj.transpose()).norm() / norm
    } else {
        0.0
    };
    let tol = Tolerances::default().kernel_rel_for(j.dim());
    let kernel_dim = small_singular_count(&j.matrix, tol);
    // W-adjoint W^-1 J^T W
    let mut adjoint = j.matrix.transpose();
    for r in 0..adjoint.nrows() {
        for c in 0..adjoint.ncols() {
            adjoint[(r, c)] *= j.pairing.weights[c] / j.pairing.weights[r];
        }
    }
    let cokernel_dim = small_singular_count(&adjoint, tol);
    let index = kernel_dim as i64 - cokernel_dim as i64;
    let symmetric = symmetry_residual < 1e-10;
    DiagnosticsReport {
        symmetry_residual,
        kernel_dim,
        cokernel_dim,
        index,
        hessian_consistency: None,
        symmetric,
        passed: symmetric && index == 0,
    }
}

fn small_singular_count(m: &DMatrix<f64>, rel: f64) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.max();
    s.iter().filter(|&&x| x < rel * smax).count()
}

/// Largest relative error between the central difference of the residual
/// along smooth random probes and `J v`.
pub fn hessian_consistency(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    j: &JacobiOperator,
    probes: usize,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairing = problem.pairing();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut v = problem.smooth_direction(&mut draw);
        let scale = pairing.norm(&v);
        v /= scale;
        let plus = problem.residual(&problem.displace(state, &(&v * h)), lambda_hat)?;
        let minus = problem.residual(&problem.displace(state, &(&v * -h)), lambda_hat)?;
        let fd = (plus - minus) / (2.0 * h);
        let jv = j.apply(&v);
        let denom = pairing.norm(&jv);
        let err = pairing.norm(&(fd - &jv));
        worst = worst.max(if denom > 0.0 { err / denom } else { err });
    }
    Ok(worst)
}

/// [`operator_diagnostics`] plus the Hessian consistency check with ten
/// probes at step `1e-5`.
pub fn full_diagnostics(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    j: &JacobiOperator,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let mut report = operator_diagnostics(j);
    let c = hessian_consistency(problem, state, lambda_hat, j, 10, 1e-5, seed)?;
    report.hessian_consistency = Some(c);
    report.passed = report.passed && c < 1e-5;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::default_grid;
    use nalgebra::Matrix2;

    fn circle(n: usize) -> Problem {
        Problem::cmc_circle(2.0, default_grid(true, n, (0.0, 0.0)).unwrap()).unwrap()
    }

    #[test]
    fn flat_circle_kernel() {
        let p = circle(64);
        let s = p.analytic_seed(0.0).unwrap();
        let j = p.jacobi(&s, 0.0).unwrap();
        let k = numerical_kernel(&j, 1e-8 * 64.0).unwrap();
        assert_eq!(k.dim(), 2);
        assert!(k.gap > 1e6, "gap {}", k.gap);
        let w = &j.pairing;
        for a in &k.vectors {
            for b in &k.vectors {
                let ip = w.inner(a, b);
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-12);
            }
            assert!(w.norm(&j.apply(a)) <= k.tolerance);
        }
        let mut shifted = j.clone();
        shifted.matrix += DMatrix::identity(64, 64) * 0.5;
        assert_eq!(numerical_kernel(&shifted, 1e-8 * 64.0).unwrap().dim(), 0);
        assert!(numerical_kernel(&j, 0.5).is_err());
    }

    #[test]
    fn reports_on_model_problems() {
        let tol = Tolerances::default();
        let p = circle(64);
        let s = p.analytic_seed(1.0).unwrap();
        let r = nondegeneracy_report(&p, &s, 1.0, &tol).unwrap();
        assert_eq!((r.kernel_dim, r.killing_rank), (2, 2));
        assert!(r.max_principal_angle < 1e-6);
        assert_eq!(r.verdict, Verdict::Nondegenerate);

        let grid = default_grid(true, 32, (0.0, 0.0)).unwrap();
        let t = Problem::harmonic_torus((1, 0), grid.clone(), Matrix2::identity(), Matrix2::identity())
            .unwrap();
        let r = nondegeneracy_report(&t, &t.analytic_seed(0.0).unwrap(), 0.0, &tol).unwrap();
        assert_eq!((r.kernel_dim, r.killing_rank, r.verdict), (2, 2, Verdict::Nondegenerate));

        let sp = Problem::harmonic_sphere(grid).unwrap();
        let r = nondegeneracy_report(&sp, &sp.analytic_seed(1.0).unwrap(), 1.0, &tol).unwrap();
        assert_eq!((r.kernel_dim, r.killing_rank, r.verdict), (3, 3, Verdict::Nondegenerate));

        let g = default_grid(false, 12, (0.0, 0.2)).unwrap();
        let pr = Problem::cmc_profile(1.0, g, (1.0, 1.0)).unwrap();
        let r = nondegeneracy_report(&pr, &pr.analytic_seed(0.0).unwrap(), 0.0, &tol).unwrap();
        assert_eq!((r.kernel_dim, r.killing_rank, r.verdict), (0, 0, Verdict::Nondegenerate));
    }

    #[test]
    fn non_critical_state_is_rejected() {
        let p = circle(32);
        let s = crate::variational::ProblemState::new(DVector::from_element(32, 0.6));
        assert!(matches!(
            nondegeneracy_report(&p, &s, 0.0, &Tolerances::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn extra_kernel_mode_is_degenerate() {
        let p = circle(32);
        let s = p.analytic_seed(0.0).unwrap();
        let j = p.jacobi(&s, 0.0).unwrap();
        // remove the constant mode, eigenvalue -1/rho
        let mut k = j.clone();
        let one = DVector::from_element(32, 1.0);
        let w = &j.pairing;
        let nrm = w.norm(&one);
        let e = &one / nrm;
        let we = e.component_mul(&w.weights);
        k.matrix += (&e * we.transpose()) * 2.0;
        let kj = p.killing_jacobi_basis(&s, 0.0).unwrap();
        let r = assess(&k, &kj, &Tolerances::default(), 0.0).unwrap();
        assert_eq!(r.kernel_dim, 3);
        assert_eq!(r.verdict, Verdict::Degenerate);
    }

    #[test]
    fn verdict_is_scale_invariant() {
        let p = circle(32);
        let s = p.analytic_seed(0.4).unwrap();
        let j = p.jacobi(&s, 0.4).unwrap();
        let kj = p.killing_jacobi_basis(&s, 0.4).unwrap();
        let a = assess(&j, &kj, &Tolerances::default(), 0.0).unwrap();
        let mut scaled = j.clone();
        scaled.pairing = j.pairing.scaled(7.5);
        scaled.matrix /= 7.5;
        let b = assess(&scaled, &kj, &Tolerances::default(), 0.0).unwrap();
        assert_eq!((a.kernel_dim, a.killing_rank, a.verdict), (b.kernel_dim, b.killing_rank, b.verdict));
    }

    #[test]
    fn slices() {
        let p = circle(32);
        let s = p.analytic_seed(0.0).unwrap();
        let slice = slice_basis(&p, &s, 0.0).unwrap();
        assert_eq!(slice.len(), 30);
        let w = p.pairing();
        let gram = slice.vectors.transpose() * DMatrix::from_diagonal(&w.weights) * &slice.vectors;
        assert!((gram - DMatrix::identity(30, 30)).amax() < 1e-12);
        // the constant direction lies in the slice
        let one = DVector::from_element(32, 1.0);
        let coeffs = slice.vectors.transpose() * one.component_mul(&w.weights);
        assert!((w.norm(&(&slice.vectors * coeffs - &one))) < 1e-12);
        for h in p.killing_jacobi_basis(&s, 0.0).unwrap() {
            let ip = slice.vectors.transpose() * h.component_mul(&w.weights);
            assert!(ip.amax() < 1e-12);
        }
        let m = transversality_margin(&p, &s, 0.0, &slice).unwrap();
        assert!(m >= 1.0 - 1e-10);

        let moved = p.analytic_seed(-0.1).unwrap();
        assert!(transversality_margin(&p, &moved, -0.1, &slice).unwrap() > 0.5);

        let kj = p.killing_jacobi_basis(&s, 0.0).unwrap();
        let fake = SliceBasis {
            vectors: DMatrix::from_columns(&kj[1..]),
            killing_rank: 2,
        };
        assert!(transversality_margin(&p, &s, 0.0, &fake).unwrap() < 1e-10);

        let g = default_grid(false, 10, (0.0, 0.2)).unwrap();
        let pr = Problem::cmc_profile(1.0, g, (1.0, 1.0)).unwrap();
        let sl = slice_basis(&pr, &pr.analytic_seed(0.0).unwrap(), 0.0).unwrap();
        assert_eq!(sl.len(), 8);
    }

    #[test]
    fn diagnostics() {
        let p = circle(64);
        let s = p.analytic_seed(0.5).unwrap();
        let j = p.jacobi(&s, 0.5).unwrap();
        let d = full_diagnostics(&p, &s, 0.5, &j, 7).unwrap();
        assert!(d.symmetry_residual < 1e-10);
        assert_eq!(d.index, 0);
        assert!(d.hessian_consistency.unwrap() < 1e-5);
        assert!(d.passed);

        let mut bad = j.clone();
        bad.matrix = DMatrix::from_fn(64, 64, |r, c| if c == (r + 1) % 64 { 1.0 } else { 0.0 });
        let d = operator_diagnostics(&bad);
        assert!(d.symmetry_residual > 0.9);
        assert!(!d.passed);
    }
}
