//! Pointwise Lagrangians and their assembly over the quadrature map.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::{Instance, Problem, ProblemState};
use crate::ambient::{sn_integral, sn_lambda};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(super) enum Level {
    Value,
    Gradient,
    Hessian,
}

pub(super) struct Assembled {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Value, gradient and Hessian of a Lagrangian in the variables
/// `(u_0, u_1, p_0, p_1)`; single-field instances use slots 0 and 2.
#[derive(Default)]
struct Local {
    l: f64,
    g: [f64; 4],
    h: [[f64; 4]; 4],
}

fn local(problem: &Problem, lambda_hat: f64, u: [f64; 2], p: [f64; 2]) -> Result<Local> {
    let mut out = Local::default();
    match &problem.instance {
        Instance::CmcCircle { h } => {
            let (r, dr) = (u[0], p[0]);
            let (s, c) = sn_lambda(lambda_hat, r);
            let q = (dr * dr + s * s).sqrt();
            if !(q > 0.0) {
                return Err(domain("degenerate curve speed"));
            }
            let q3 = q * q * q;
            out.l = q - h * sn_integral(lambda_hat, r);
            out.g[0] = s * c / q - h * s;
            out.g[2] = dr / q;
            out.h[0][0] = (c * c - lambda_hat * s * s) / q - s * s * c * c / q3 - h * c;
            out.h[0][2] = -s * c * dr / q3;
            out.h[2][2] = s * s / q3;
        }
        Instance::CmcProfile { h, .. } => {
            let (rho, dr) = (u[0], p[0]);
            let (s, c) = sn_lambda(lambda_hat, rho);
            let w = (1.0 + dr * dr).sqrt();
            out.l = TAU * (s * w - h * sn_integral(lambda_hat, rho));
            out.g[0] = TAU * (c * w - h * s);
            out.g[2] = TAU * s * dr / w;
            out.h[0][0] = TAU * (-lambda_hat * s * w - h * c);
            out.h[0][2] = TAU * c * dr / w;
            out.h[2][2] = TAU * s / (w * w * w);
        }
        Instance::HarmonicTorus { q0, q1, .. } => {
            // E = 1/2 int_0^1 |phi_s|^2 ds = pi int_0^{2 pi} |phi_theta|^2 d theta
            let q = q0 * (1.0 - lambda_hat) + q1 * lambda_hat;
            let qp = [
                q[(0, 0)] * p[0] + q[(0, 1)] * p[1],
                q[(1, 0)] * p[0] + q[(1, 1)] * p[1],
            ];
            out.l = PI * (p[0] * qp[0] + p[1] * qp[1]);
            out.g[2] = TAU * qp[0];
            out.g[3] = TAU * qp[1];
            for a in 0..2 {
                for b in 0..2 {
                    out.h[2 + a][2 + b] = TAU * q[(a, b)];
                }
            }
        }
        Instance::HarmonicSphere => {
            let scale = PI / lambda_hat;
            let s = u[0].sin();
            let (s2, c2) = ((2.0 * u[0]).sin(), (2.0 * u[0]).cos());
            out.l = scale * (p[0] * p[0] + s * s * p[1] * p[1]);
            out.g[0] = scale * s2 * p[1] * p[1];
            out.g[2] = 2.0 * scale * p[0];
            out.g[3] = 2.0 * scale * s * s * p[1];
            out.h[0][0] = 2.0 * scale * c2 * p[1] * p[1];
            out.h[0][3] = 2.0 * scale * s2 * p[1];
            out.h[2][2] = 2.0 * scale;
            out.h[3][3] = 2.0 * scale * s * s;
        }
    }
    for a in 0..4 {
        for b in 0..a {
            out.h[a][b] = out.h[b][a];
        }
    }
    Ok(out)
}

/// Field values and derivatives at the quadrature points, per component.
fn point_fields(problem: &Problem, state: &ProblemState) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let q = &problem.grid.quadrature;
    let n = problem.grid.len();
    let comps = problem.components();
    let x = if comps == 2 {
        problem.periodic_part(state)
    } else {
        state.values.clone()
    };
    let w = problem.winding();
    let mut u = Vec::with_capacity(comps);
    let mut p = Vec::with_capacity(comps);
    for c in 0..comps {
        let xc = x.rows(c * n, n);
        let mut uc = &q.values * xc;
        let mut pc = &q.derivs * xc;
        if w[c] != 0.0 {
            for (m, t) in q.points.iter().enumerate() {
                uc[m] += w[c] * t / TAU;
                pc[m] += w[c] / TAU;
            }
        }
        u.push(uc);
        p.push(pc);
    }
    (u, p)
}

pub(super) fn assemble(
    problem: &Problem,
    state: &ProblemState,
    lambda_hat: f64,
    level: Level,
) -> Result<Assembled> {
    let q = &problem.grid.quadrature;
    let n = problem.grid.len();
    let m = q.points.len();
    let comps = problem.components();
    let (u, p) = point_fields(problem, state);

    let mut value = 0.0;
    // weighted first and second derivative coefficients per point
    let mut g = vec![DVector::zeros(m); 4];
    let mut h = vec![vec![DVector::zeros(m); 4]; 4];
    for k in 0..m {
        let uu = [u[0][k], if comps == 2 { u[1][k] } else { 0.0 }];
        let pp = [p[0][k], if comps == 2 { p[1][k] } else { 0.0 }];
        let loc = local(problem, lambda_hat, uu, pp)?;
        let wk = q.weights[k];
        value += wk * loc.l;
        if level >= Level::Gradient {
            for a in 0..4 {
                g[a][k] = wk * loc.g[a];
            }
        }
        if level == Level::Hessian {
            for a in 0..4 {
                for b in 0..4 {
                    h[a][b][k] = wk * loc.h[a][b];
                }
            }
        }
    }
    if !value.is_finite() {
        return Err(domain("functional is not finite"));
    }

    let mut gradient = DVector::zeros(comps * n);
    if level >= Level::Gradient {
        for c in 0..comps {
            let gc = q.values.tr_mul(&g[c]) + q.derivs.tr_mul(&g[2 + c]);
            gradient.rows_mut(c * n, n).copy_from(&gc);
        }
    }

    let hessian = (level == Level::Hessian).then(|| {
        let mut hess = DMatrix::zeros(comps * n, comps * n);
        let scaled = |d: &DVector<f64>, a: &DMatrix<f64>| {
            let mut out = a.clone();
            for (r, s) in d.iter().enumerate() {
                out.row_mut(r).scale_mut(*s);
            }
            out
        };
        for a in 0..comps {
            for b in 0..comps {
                let cu = scaled(&h[a][b], &q.values) + scaled(&h[a][2 + b], &q.derivs);
                let cp = scaled(&h[2 + a][b], &q.values) + scaled(&h[2 + a][2 + b], &q.derivs);
                let block = q.values.tr_mul(&cu) + q.derivs.tr_mul(&cp);
                hess.view_mut((a * n, b * n), (n, n)).copy_from(&block);
            }
        }
        hess
    });

    Ok(Assembled {
        value,
        gradient,
        hessian,
    })
}

/// Length of a harmonic loop, `int_0^1 |phi_s| ds`.
pub(super) fn loop_length(problem: &Problem, state: &ProblemState, lambda_hat: f64) -> Result<f64> {
    let q = &problem.grid.quadrature;
    let (u, p) = point_fields(problem, state);
    let metric = problem.model(lambda_hat)?;
    let mut total = 0.0;
    for k in 0..q.points.len() {
        let c = nalgebra::DVector::from_vec(vec![u[0][k], u[1][k]]);
        let g = metric.metric_unchecked(&c);
        let v = nalgebra::Vector2::new(p[0][k], p[1][k]);
        let speed2 = v[0] * (g[(0, 0)] * v[0] + g[(0, 1)] * v[1])
            + v[1] * (g[(1, 0)] * v[0] + g[(1, 1)] * v[1]);
        total += q.weights[k] * speed2.sqrt();
    }
    Ok(total)
}
