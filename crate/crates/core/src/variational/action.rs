//! Action of the symmetry group on discrete states.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::{interpolant, Instance, Problem, ProblemState};
use crate::ambient::{chart_from_embedded, chart_velocity, embed_point, sn_lambda};
use crate::error::{domain, Result};
use crate::lie_bundle::{algebra_basis, expm};

/// Generators in the order used by motion coefficients and by the
/// Killing–Jacobi list.
pub fn generator_names(instance: &Instance) -> Vec<&'static str> {
    match instance {
        Instance::CmcCircle { .. } => vec!["rotation", "transvection_1", "transvection_2"],
        Instance::CmcProfile { .. } => Vec::new(),
        Instance::HarmonicTorus { .. } => vec!["translation_x", "translation_y", "domain_shift"],
        Instance::HarmonicSphere => {
            vec!["rotation", "transvection_1", "transvection_2", "domain_shift"]
        }
    }
}

fn unwrap_near(angle: f64, reference: f64) -> f64 {
    angle + TAU * ((reference - angle) / TAU).round()
}

fn group_element(lambda: f64, t: &[f64]) -> Result<DMatrix<f64>> {
    let basis = algebra_basis(lambda, 2)?;
    let mut x = DMatrix::zeros(3, 3);
    for (m, c) in basis.matrices().iter().zip(t) {
        x += m * *c;
    }
    Ok(expm(&x))
}

pub(super) fn apply(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    t: &[f64],
) -> Result<ProblemState> {
    match problem.instance {
        Instance::CmcCircle { .. } => {
            let g = group_element(lambda_hat, t)?;
            move_radial_graph(problem, state, lambda_hat, &g)
        }
        Instance::CmcProfile { .. } => Ok(state.clone()),
        Instance::HarmonicTorus { .. } => {
            let mut moved = shift_domain(problem, state, t[2]);
            let n = problem.grid.len();
            for c in 0..2 {
                for j in 0..n {
                    moved.values[c * n + j] += t[c];
                }
            }
            Ok(moved)
        }
        Instance::HarmonicSphere => {
            let shifted = shift_domain(problem, state, t[3]);
            let g = group_element(1.0, &t[..3])?;
            let n = problem.grid.len();
            let mut values = shifted.values.clone();
            for j in 0..n {
                let (th, ph) = (shifted.values[j], shifted.values[n + j]);
                let y = &g * embed_point(1.0, th, ph);
                let (th2, ph2) = chart_from_embedded(1.0, &y);
                values[j] = th2;
                values[n + j] = unwrap_near(ph2, ph);
            }
            Ok(ProblemState { values })
        }
    }
}

/// `phi(theta) -> phi(theta + c)` through the trigonometric interpolant of
/// the periodic part.
fn shift_domain(problem: &Problem, state: &ProblemState, c: f64) -> ProblemState {
    if c == 0.0 {
        return state.clone();
    }
    let n = problem.grid.len();
    let w = problem.winding();
    let psi = problem.periodic_part(state);
    let mut values = state.values.clone();
    for comp in 0..2 {
        let f = interpolant(&psi.rows(comp * n, n).into_owned());
        for j in 0..n {
            let x = problem.grid.nodes[j] + c;
            values[comp * n + j] = w[comp] * x / TAU + f.eval(x).0;
        }
    }
    ProblemState { values }
}

/// Moves the curve `theta -> (r(theta), theta)` by the matrix `g` and
/// re-extracts it as a radial graph over the nodes.
fn move_radial_graph(
    problem: &Problem,
    state: &ProblemState,
    lambda: f64,
    g: &DMatrix<f64>,
) -> Result<ProblemState> {
    let n = problem.grid.len();
    let nodes = &problem.grid.nodes;
    let interp = interpolant(&state.values);
    // (image radius, image angle in (-pi, pi], d angle / d theta)
    let image = |theta: f64| {
        let (r, dr) = interp.eval(theta);
        let (s, c) = sn_lambda(lambda, r);
        let (st, ct) = theta.sin_cos();
        let x = embed_point(lambda, r, theta);
        let dx = DVector::from_vec(vec![
            -lambda * s * dr,
            c * dr * ct - s * st,
            c * dr * st + s * ct,
        ]);
        let y = g * x;
        let (r2, t2) = chart_from_embedded(lambda, &y);
        let (_, dt2) = chart_velocity(lambda, r2, t2, &(g * dx));
        (r2, t2, dt2)
    };

    let mut angles = Vec::with_capacity(n + 1);
    for j in 0..n {
        let raw = image(nodes[j]).1;
        let a = match angles.last() {
            Some(&prev) => unwrap_near(raw, prev),
            None => raw,
        };
        angles.push(a);
    }
    angles.push(angles[0] + TAU);
    if angles.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("moved curve is not a radial graph about the chart origin"));
    }

    let h = TAU / n as f64;
    let mut values = DVector::zeros(n);
    for k in 0..n {
        let mut target = nodes[k];
        target += TAU * ((angles[0] - target) / TAU).ceil();
        let j = angles.partition_point(|&a| a <= target).clamp(1, n) - 1;
        let (mut lo, mut hi) = (j as f64 * h, (j + 1) as f64 * h);
        let frac = (target - angles[j]) / (angles[j + 1] - angles[j]);
        let mut theta = lo + frac * h;
        let mut found = None;
        let mut best = (f64::INFINITY, 0.0);
        for _ in 0..80 {
            let (r2, t2, dt2) = image(theta);
            let f = unwrap_near(t2, target) - target;
            if f.abs() < best.0 {
                best = (f.abs(), r2);
            }
            if f.abs() < 1e-15 {
                found = Some(r2);
                break;
            }
            if f < 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let newton = theta - f / dt2;
            theta = if newton > lo && newton < hi && dt2 > 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 4.0 * f64::EPSILON * PI {
                found = Some(image(theta).0);
                break;
            }
        }
        if found.is_none() && best.0 < 1e-12 {
            found = Some(best.1);
        }
        values[k] = found.ok_or_else(|| domain("radial re-extraction did not converge"))?;
    }
    Ok(ProblemState { values })
}
