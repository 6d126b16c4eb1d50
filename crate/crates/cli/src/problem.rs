//! Building problems, seeds and fixtures from the configuration.

use std::path::Path;

use equideform::mesh::{build_grid, DiffOrder, GridKind};
use equideform::variational::{Instance, JacobiOperator, Problem, ProblemState};
use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use serde::Deserialize;

use crate::config::{InstanceKind, ProblemSection};
use crate::CliError;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn matrix(m: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

pub fn build_problem(p: &ProblemSection) -> Result<Problem, CliError> {
    build_problem_with_h(p, p.h)
}

/// As [`build_problem`] with the curvature replaced by `h`.
pub fn build_problem_with_h(p: &ProblemSection, h: Option<f64>) -> Result<Problem, CliError> {
    let periodic = p.instance != InstanceKind::CmcProfile;
    let order = match &p.order {
        Some(s) => s.parse::<DiffOrder>().map_err(config_err)?,
        None if periodic => DiffOrder::Spectral,
        None => DiffOrder::Fourth,
    };
    let kind = if periodic {
        GridKind::Periodic { n: p.n }
    } else {
        let [a, b] = p
            .interval
            .ok_or_else(|| config_err("cmc_profile needs problem.interval"))?;
        GridKind::Dirichlet { n: p.n, a, b }
    };
    let grid = build_grid(kind, order).map_err(config_err)?;
    let need_h = || h.ok_or_else(|| config_err("CMC instances need problem.h"));
    let problem = match p.instance {
        InstanceKind::CmcCircle => Problem::cmc_circle(need_h()?, grid),
        InstanceKind::CmcProfile => {
            let [r0, r1] = p
                .radii
                .ok_or_else(|| config_err("cmc_profile needs problem.radii"))?;
            Problem::cmc_profile(need_h()?, grid, (r0, r1))
        }
        InstanceKind::HarmonicTorus => {
            let [a, b] = p.class.unwrap_or([1, 0]);
            let q0 = matrix(p.q0.unwrap_or([[1.0, 0.0], [0.0, 1.0]]));
            let q1 = p.q1.map(matrix).unwrap_or(q0);
            Problem::harmonic_torus((a, b), grid, q0, q1)
        }
        InstanceKind::HarmonicSphere => Problem::harmonic_sphere(grid),
    };
    problem.map_err(config_err)
}

/// Parameter used by `analyze` and `congruence` when `problem.lambda` is absent.
pub fn default_lambda(p: &ProblemSection) -> f64 {
    p.lambda.unwrap_or(match p.instance {
        InstanceKind::CmcCircle | InstanceKind::HarmonicSphere => 1.0,
        InstanceKind::CmcProfile | InstanceKind::HarmonicTorus => 0.0,
    })
}

#[derive(Deserialize)]
struct StateFile {
    values: Vec<f64>,
}

/// Starting state: the configured state file (relative to the config
/// directory) or the built-in analytic seed.
pub fn initial_state(
    problem: &Problem,
    p: &ProblemSection,
    base: &Path,
    lambda_hat: f64,
) -> Result<ProblemState, CliError> {
    match &p.state_file {
        Some(file) => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            let parsed: StateFile = serde_json::from_str(&text)
                .map_err(|e| config_err(format!("invalid state file: {e}")))?;
            if parsed.values.len() != problem.state_len() {
                return Err(config_err(format!(
                    "state file has {} values, problem needs {}",
                    parsed.values.len(),
                    problem.state_len()
                )));
            }
            Ok(ProblemState::new(DVector::from_vec(parsed.values)))
        }
        None => problem.analytic_seed(lambda_hat).map_err(config_err),
    }
}

/// Name of the derived scalar written to the CSV summary.
pub fn primary_scalar(problem: &Problem) -> &'static str {
    match problem.instance {
        Instance::CmcCircle { .. } => "best_fit_radius",
        Instance::CmcProfile { .. } => "mid_radius",
        Instance::HarmonicTorus { .. } => "length",
        Instance::HarmonicSphere => "length_times_sqrt_lambda",
    }
}

/// Removes the `W`-eigenmode of smallest nonzero eigenvalue, so that the
/// operator gains one kernel direction not generated by isometries.
pub fn inject_degenerate_mode(j: &JacobiOperator, tol_rel: f64) -> JacobiOperator {
    let s = j.pairing.sqrt_weights();
    let n = j.dim();
    let m = DMatrix::from_fn(n, n, |r, c| j.matrix[(r, c)] * s[r] / s[c]);
    let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let scale = eig.eigenvalues.amax();
    let pick = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, mu)| mu.abs() > tol_rel * scale)
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i);
    let mut out = j.clone();
    if let Some(i) = pick {
        let mu = eig.eigenvalues[i];
        let y = eig.eigenvectors.column(i);
        let left = y.component_div(&s);
        let right = y.component_mul(&s);
        out.matrix -= left * right.transpose() * mu;
    }
    out
}
