use std::time::Instant;

use equideform::continuation::{continue_branch, ContinuationConfig, Termination};
use equideform::variational::{default_grid, Problem};
use nalgebra::Matrix2;

/// Closed-form oracle: root of `kappa(rho; lambda) = h` by bisection with
/// std trigonometric functions.
fn oracle_radius(lambda: f64, h: f64) -> f64 {
    let kappa = |rho: f64| {
        if lambda > 0.0 {
            lambda.sqrt() / (lambda.sqrt() * rho).tan()
        } else if lambda < 0.0 {
            (-lambda).sqrt() / ((-lambda).sqrt() * rho).tanh()
        } else {
            1.0 / rho
        }
    };
    let (mut lo, mut hi) = (1e-6, if lambda > 0.0 { 3.1 / lambda.sqrt() } else { 50.0 });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kappa(mid) > h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn circle_branch_follows_closed_form_radius() {
    let p = Problem::cmc_circle(2.0, default_grid(true, 128, (0.0, 0.0)).unwrap()).unwrap();
    let seed = p.analytic_seed(1.0).unwrap();
    let cfg = ContinuationConfig::new(1.0, -3.0, 4.0 / 60.0);
    let t = Instant::now();
    let run = continue_branch(&p, &seed, &cfg).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    println!("circle branch: {} records in {elapsed:.2} s", run.records.len());
    assert_eq!(run.termination, Termination::Completed);
    assert_eq!(run.records.len(), 61);
    let mut worst: f64 = 0.0;
    for rec in &run.records {
        let err = (rec.derived_scalars["best_fit_radius"] - oracle_radius(rec.lambda_hat, 2.0)).abs();
        worst = worst.max(err);
        assert_eq!((rec.kernel_dim, rec.killing_rank), (2, 2));
        assert!(rec.max_principal_angle < 1e-6);
        assert!(rec.spectral_gap > 1e3);
        assert!(rec.transversality_margin > 0.1);
    }
    println!("max radius error {worst:e}");
    assert!(worst < 1e-8);
    for d in &run.diagnostics {
        assert!(d.operator.passed, "{:?}", d.operator);
    }
}

#[test]
fn circle_branch_fails_past_horocycle_limit() {
    let p = Problem::cmc_circle(2.0, default_grid(true, 128, (0.0, 0.0)).unwrap()).unwrap();
    let seed = p.analytic_seed(-3.0).unwrap();
    let mut cfg = ContinuationConfig::new(-3.0, -4.5, 0.1);
    cfg.min_step = 1e-4;
    let t = Instant::now();
    let run = continue_branch(&p, &seed, &cfg).unwrap();
    println!(
        "failure branch: {} records in {:.2} s, {:?}",
        run.records.len(),
        t.elapsed().as_secs_f64(),
        run.termination
    );
    let last = run.records.last().unwrap();
    println!("last lambda {} gap {:e}", last.lambda_hat, last.spectral_gap);
    assert!(matches!(run.termination, Termination::Failed { .. }));
    assert!(last.lambda_hat > -4.0);
    assert_eq!((last.kernel_dim, last.killing_rank), (2, 2));
    assert!(last.spectral_gap > 1e3 && last.max_principal_angle < 1e-6);
    assert!(run.diagnostics.last().unwrap().operator.passed);
}

#[test]
fn torus_branch_lengths() {
    let p = Problem::harmonic_torus(
        (1, 0),
        default_grid(true, 64, (0.0, 0.0)).unwrap(),
        Matrix2::identity(),
        Matrix2::new(4.0, 0.0, 0.0, 1.0),
    )
    .unwrap();
    let seed = p.analytic_seed(0.0).unwrap();
    let run = continue_branch(&p, &seed, &ContinuationConfig::new(0.0, 1.0, 0.1)).unwrap();
    assert_eq!(run.termination, Termination::Completed);
    for rec in &run.records {
        let want = (1.0 + 3.0 * rec.lambda_hat).sqrt();
        assert!((rec.derived_scalars["length"] - want).abs() < 1e-10);
        assert_eq!((rec.kernel_dim, rec.killing_rank), (2, 2));
    }
}

#[test]
fn sphere_branch_lengths() {
    let p = Problem::harmonic_sphere(default_grid(true, 64, (0.0, 0.0)).unwrap()).unwrap();
    let seed = p.analytic_seed(0.5).unwrap();
    let run = continue_branch(&p, &seed, &ContinuationConfig::new(0.5, 2.0, 0.1)).unwrap();
    assert_eq!(run.termination, Termination::Completed);
    for rec in &run.records {
        assert!((rec.derived_scalars["length_times_sqrt_lambda"] - std::f64::consts::TAU).abs() < 1e-8);
        assert_eq!((rec.kernel_dim, rec.killing_rank), (3, 3));
    }
}

#[test]
fn profile_legs() {
    let grid = default_grid(false, 41, (0.0, 1.0)).unwrap();
    let p = Problem::cmc_profile(1.0, grid, (1.0, 1.0)).unwrap();
    let seed = p.analytic_seed(0.0).unwrap();
    for end in [0.2, -0.2] {
        let run = continue_branch(&p, &seed, &ContinuationConfig::new(0.0, end, 0.05)).unwrap();
        assert_eq!(run.termination, Termination::Completed);
        for rec in &run.records {
            assert!(rec.residual_norm < 1e-10);
            assert!(rec.derived_scalars["max_mean_curvature_defect"] < 1e-6);
            assert_eq!((rec.kernel_dim, rec.killing_rank), (0, 0));
        }
        println!("profile to {end}: mid radius {}", run.records.last().unwrap().derived_scalars["mid_radius"]);
    }
}
