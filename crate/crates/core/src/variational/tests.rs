use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DVector, Matrix2, SymmetricEigen};

use super::*;
use crate::linalg::rank_info;

fn circle(h: f64, n: usize) -> Problem {
    Problem::cmc_circle(h, default_grid(true, n, (0.0, 0.0)).unwrap()).unwrap()
}

fn torus(q1: Matrix2<f64>, n: usize) -> Problem {
    Problem::harmonic_torus((1, 0), default_grid(true, n, (0.0, 0.0)).unwrap(), Matrix2::identity(), q1)
        .unwrap()
}

fn sphere(n: usize) -> Problem {
    Problem::harmonic_sphere(default_grid(true, n, (0.0, 0.0)).unwrap()).unwrap()
}

fn constant(n: usize, r: f64) -> ProblemState {
    ProblemState::new(DVector::from_element(n, r))
}

/// Eigenvalues of `J`, computed from the symmetric form `W^1/2 J W^-1/2`.
fn spectrum(j: &JacobiOperator) -> Vec<f64> {
    let s = j.pairing.sqrt_weights();
    let mut m = j.matrix.clone();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            m[(r, c)] *= s[r] / s[c];
        }
    }
    let m = (&m + m.transpose()) * 0.5;
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

#[test]
fn flat_circle_value_uses_inward_sign() {
    let p = circle(2.0, 64);
    let v = p.value(&constant(64, 0.5), 0.0).unwrap();
    // 2 pi rho - H pi rho^2
    assert!((v - FRAC_PI_2).abs() < 1e-13);
}

#[test]
fn equator_length() {
    let p = Problem::cmc_circle(0.0, default_grid(true, 32, (0.0, 0.0)).unwrap()).unwrap();
    let v = p.value(&constant(32, FRAC_PI_2), 1.0).unwrap();
    assert!((v - TAU).abs() < 1e-13);
}

#[test]
fn torus_line_energy_and_residual() {
    let p = torus(Matrix2::new(4.0, 0.0, 0.0, 1.0), 32);
    let s = p.analytic_seed(0.0).unwrap();
    assert!((p.value(&s, 0.0).unwrap() - 0.5).abs() < 1e-14);
    let q = Problem::harmonic_torus(
        (2, -1),
        default_grid(true, 32, (0.0, 0.0)).unwrap(),
        Matrix2::new(2.0, 0.7, 0.7, 1.5),
        Matrix2::new(3.0, -0.2, -0.2, 0.9),
    )
    .unwrap();
    let line = q.analytic_seed(0.4).unwrap();
    assert!(q.residual(&line, 0.4).unwrap().amax() < 1e-13);
}

#[test]
fn circle_residuals_vanish() {
    let p = circle(2.0, 64);
    assert!(p.residual(&constant(64, 0.5), 0.0).unwrap().amax() < 1e-10);
    assert!(p.residual(&constant(64, 0.5f64.atan()), 1.0).unwrap().amax() < 1e-10);
    let rho = geodesic_circle_radius(-2.0, 2.0).unwrap();
    assert!(p.residual(&constant(64, rho), -2.0).unwrap().amax() < 1e-10);
}

#[test]
fn circle_residual_matches_curvature_defect() {
    // residual ~ (kappa - H) sn(r) on a non-critical circle
    let p = circle(2.0, 32);
    for &(lambda, r) in &[(0.0, 0.7), (1.0, 0.3), (-1.5, 0.9)] {
        let s = constant(32, r);
        let res = p.residual(&s, lambda).unwrap();
        let kappa = p.geodesic_curvature(&s, lambda).unwrap();
        let sn = sn_lambda(lambda, r).0;
        for j in 0..32 {
            assert!((res[j] - (kappa[j] - 2.0) * sn).abs() < 1e-12);
        }
    }
}

#[test]
fn geodesic_curvature_of_circles() {
    let p = circle(1.0, 32);
    let rho = 0.8;
    let k0 = p.geodesic_curvature(&constant(32, rho), 0.0).unwrap();
    let k1 = p.geodesic_curvature(&constant(32, rho), 1.0).unwrap();
    let km = p.geodesic_curvature(&constant(32, rho), -1.0).unwrap();
    for j in 0..32 {
        assert!((k0[j] - 1.0 / rho).abs() < 1e-12);
        assert!((k1[j] - 1.0 / rho.tan()).abs() < 1e-10);
        assert!((km[j] - 1.0 / rho.tanh()).abs() < 1e-10);
    }
    let t = torus(Matrix2::identity(), 16);
    let seed = t.analytic_seed(0.0).unwrap();
    assert!(matches!(t.geodesic_curvature(&seed, 0.0), Err(Error::Unsupported(_))));
}

#[test]
fn closed_form_radius_is_stationary_for_the_functional() {
    // F(rho) = 2 pi (sn(rho) - H Sint(rho)) evaluated with std functions.
    let f = |lambda: f64, rho: f64| {
        let sn = if lambda > 0.0 {
            (lambda.sqrt() * rho).sin() / lambda.sqrt()
        } else if lambda < 0.0 {
            ((-lambda).sqrt() * rho).sinh() / (-lambda).sqrt()
        } else {
            rho
        };
        let area = if lambda > 0.0 {
            (1.0 - (lambda.sqrt() * rho).cos()) / lambda
        } else if lambda < 0.0 {
            (((-lambda).sqrt() * rho).cosh() - 1.0) / -lambda
        } else {
            0.5 * rho * rho
        };
        TAU * (sn - 2.0 * area)
    };
    for &lambda in &[1.0, 0.3, 0.0, -1.0, -3.0] {
        let rho = geodesic_circle_radius(lambda, 2.0).unwrap();
        let h = 1e-5;
        let d = (f(lambda, rho + h) - f(lambda, rho - h)) / (2.0 * h);
        assert!(d.abs() < 1e-9, "lambda {lambda}: slope {d}");
        // a maximum of the radial reduction
        assert!(f(lambda, rho + 1e-3) < f(lambda, rho) && f(lambda, rho - 1e-3) < f(lambda, rho));
    }
    assert!(geodesic_circle_radius(-4.0, 2.0).is_err());
    assert!((geodesic_circle_radius(1.0, 2.0).unwrap() - 0.5f64.atan()).abs() < 1e-15);
}

#[test]
fn flat_circle_jacobi_spectrum() {
    // eigenvalues (k^2 - 1) / rho for |k| < N/2, Nyquist mode halved
    let n = 64;
    let rho = 0.5;
    let p = circle(2.0, n);
    let j = p.jacobi(&constant(n, rho), 0.0).unwrap();
    let got = spectrum(&j);
    let mut want: Vec<f64> = vec![-1.0 / rho];
    for k in 1..n / 2 {
        let e = ((k * k) as f64 - 1.0) / rho;
        want.push(e);
        want.push(e);
    }
    want.push((((n / 2) * (n / 2)) as f64 - 1.0) / (2.0 * rho));
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9 * w.abs().max(1.0), "{g} vs {w}");
    }
    assert_eq!(got.iter().filter(|e| e.abs() < 1e-8).count(), 2);
}

#[test]
fn jacobi_is_weighted_symmetric() {
    let p = circle(2.0, 32);
    let mut s = constant(32, 0.6);
    for j in 0..32 {
        s.values[j] += 0.05 * (3.0 * p.grid.nodes[j]).cos();
    }
    let j = p.jacobi(&s, 0.7).unwrap();
    let wj = j.weighted();
    assert!((&wj - wj.transpose()).norm() / wj.norm() < 1e-14);
}

#[test]
fn harmonic_kernels() {
    let t = torus(Matrix2::new(4.0, 0.0, 0.0, 1.0), 32);
    let e = spectrum(&t.jacobi(&t.analytic_seed(0.5).unwrap(), 0.5).unwrap());
    assert_eq!(e.iter().filter(|x| x.abs() < 1e-8).count(), 2);
    assert!(e.iter().all(|x| *x > -1e-10));

    let s = sphere(32);
    for &lambda in &[0.5, 1.0, 2.0] {
        let seed = s.analytic_seed(lambda).unwrap();
        let rm = s.residual(&seed, lambda).unwrap().amax(); assert!(rm < 1e-11, "{rm}");
        let e = spectrum(&s.jacobi(&seed, lambda).unwrap());
        assert_eq!(e.iter().filter(|x| x.abs() < 1e-8).count(), 3, "lambda {lambda}");
    }
}

#[test]
fn killing_jacobi_fields_of_a_centered_circle() {
    let p = circle(2.0, 32);
    let s = constant(32, 0.5);
    let kj = p.killing_jacobi_basis(&s, 0.0).unwrap();
    assert_eq!(kj.len(), 3);
    assert!(kj[0].amax() < 1e-13);
    for j in 0..32 {
        let t = p.grid.nodes[j];
        assert!((kj[1][j] - t.cos()).abs() < 1e-14);
        assert!((kj[2][j] - t.sin()).abs() < 1e-14);
    }
    let m = nalgebra::DMatrix::from_columns(&kj);
    assert_eq!(rank_info(&m, 1e-10).0, 2);
}

#[test]
fn killing_jacobi_ranks_for_loops() {
    let t = torus(Matrix2::identity(), 16);
    let kj = t.killing_jacobi_basis(&t.analytic_seed(0.0).unwrap(), 0.0).unwrap();
    assert_eq!(rank_info(&nalgebra::DMatrix::from_columns(&kj), 1e-10).0, 2);
    let s = sphere(16);
    let kj = s.killing_jacobi_basis(&s.analytic_seed(1.0).unwrap(), 1.0).unwrap();
    assert_eq!(kj.len(), 4);
    assert_eq!(rank_info(&nalgebra::DMatrix::from_columns(&kj), 1e-10).0, 3);
}

#[test]
fn killing_jacobi_fields_are_jacobi_fields() {
    let p = circle(2.0, 64);
    let lambda = 0.6;
    let seed = p.analytic_seed(lambda).unwrap();
    let moved = p.apply_motion(&seed, lambda, &[0.02, 0.05, -0.03]).unwrap();
    let w = p.pairing();
    let j = p.jacobi(&moved, lambda).unwrap();
    for h in p.killing_jacobi_basis(&moved, lambda).unwrap() {
        assert!(w.norm(&j.apply(&h)) < 1e-6 * w.norm(&h).max(1e-300));
    }
}

#[test]
fn motions_preserve_the_functional_and_criticality() {
    let p = circle(2.0, 64);
    let lambda = -1.0;
    let seed = p.analytic_seed(lambda).unwrap();
    let f0 = p.value(&seed, lambda).unwrap();
    let moved = p.apply_motion(&seed, lambda, &[0.1, -0.07, 0.04]).unwrap();
    assert!((p.value(&moved, lambda).unwrap() - f0).abs() < 1e-12);
    assert!(p.residual_norm(&moved, lambda).unwrap() < 1e-10);
    let back = p.apply_motion(&moved, lambda, &[-0.1, 0.07, -0.04]).unwrap();
    assert!((back.values - seed.values).amax() < 1e-12);
}

#[test]
fn flat_translation_matches_closed_form() {
    let p = circle(2.0, 64);
    let seed = constant(64, 0.5);
    let d = 0.1;
    let moved = p.apply_motion(&seed, 0.0, &[0.0, d, 0.0]).unwrap();
    for j in 0..64 {
        let t = p.grid.nodes[j];
        let want = d * t.cos() + (0.25 - d * d * t.sin().powi(2)).sqrt();
        assert!((moved.values[j] - want).abs() < 1e-13);
    }
}

#[test]
fn loop_motions() {
    let t = torus(Matrix2::new(2.0, 0.3, 0.3, 1.0), 32);
    let seed = t.analytic_seed(0.3).unwrap();
    let mut s = seed.clone();
    for j in 0..32 {
        s.values[j] += 0.01 * (2.0 * t.grid.nodes[j]).sin();
        s.values[32 + j] += 0.02 * t.grid.nodes[j].cos();
    }
    let moved = t.apply_motion(&s, 0.3, &[0.1, -0.2, 0.3]).unwrap();
    assert!((t.value(&moved, 0.3).unwrap() - t.value(&s, 0.3).unwrap()).abs() < 1e-13);

    let sp = sphere(32);
    let eq = sp.analytic_seed(2.0).unwrap();
    let mut s = eq.clone();
    for j in 0..32 {
        s.values[j] += 0.03 * (3.0 * sp.grid.nodes[j]).cos();
    }
    let moved = sp.apply_motion(&s, 2.0, &[0.05, 0.08, -0.06, 0.4]).unwrap();
    assert!((sp.value(&moved, 2.0).unwrap() - sp.value(&s, 2.0).unwrap()).abs() < 1e-12);
}

#[test]
fn loop_lengths() {
    let t = torus(Matrix2::new(4.0, 0.0, 0.0, 1.0), 32);
    for &tt in &[0.0, 0.25, 1.0] {
        let seed = t.analytic_seed(tt).unwrap();
        let len = t.derived_scalars(&seed, tt).unwrap()["length"];
        assert!((len - (1.0 + 3.0 * tt).sqrt()).abs() < 1e-13);
    }
    let s = sphere(32);
    let seed = s.analytic_seed(2.0).unwrap();
    let d = s.derived_scalars(&seed, 2.0).unwrap();
    assert!((d["length_times_sqrt_lambda"] - TAU).abs() < 1e-13);
}

#[test]
fn best_fit_radius_of_circles() {
    let p = circle(2.0, 32);
    for &lambda in &[-2.0, 0.0, 1e-9, 1.5] {
        let d = p.derived_scalars(&constant(32, 0.4), lambda).unwrap();
        assert!((d["best_fit_radius"] - 0.4).abs() < 1e-13, "lambda {lambda}");
    }
}

#[test]
fn profile_cylinder() {
    let grid = default_grid(false, 24, (0.0, 1.0)).unwrap();
    let p = Problem::cmc_profile(1.0, grid, (1.0, 1.0)).unwrap();
    let seed = p.analytic_seed(0.0).unwrap();
    assert_eq!(p.free_dim(), 22);
    let rm = p.residual(&seed, 0.0).unwrap().amax(); assert!(rm < 1e-11, "{rm}");
    // area 2 pi R L minus H * volume pi R^2 L
    assert!((p.value(&seed, 0.0).unwrap() - PI).abs() < 1e-13);
    let e = spectrum(&p.jacobi(&seed, 0.0).unwrap());
    assert!(e[0] > 5.0, "lowest eigenvalue {}", e[0]);
    assert!(p.killing_jacobi_basis(&seed, 0.0).unwrap().is_empty());
    let mut bad = seed.clone();
    bad.values[0] = 0.9;
    assert!(p.residual(&bad, 0.0).is_err());
}

#[test]
fn domain_errors() {
    let p = circle(2.0, 16);
    assert!(matches!(p.value(&constant(16, 0.01), 0.0), Err(Error::Domain(_))));
    assert!(matches!(p.value(&constant(16, 3.0), 1.0), Err(Error::Domain(_))));
    assert!(matches!(p.value(&constant(15, 0.5), 0.0), Err(Error::Shape(_))));
    let grid = default_grid(false, 10, (0.0, 1.0)).unwrap();
    assert!(Problem::cmc_circle(2.0, grid).is_err());
}
