//! The warping function of the geodesic-polar chart,
//! `sn_lambda(r) = sin(sqrt(lambda) r)/sqrt(lambda)`, continued through
//! `lambda = 0` and into negative curvature, plus the embedding of the
//! chart into the linear model on which the matrix groups act.

use nalgebra::DVector;

use crate::scalar::Real;

/// Below this value of `|lambda| r^2` the series branch is used.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// `(sn_lambda(r), sn_lambda'(r))`.
pub fn sn_lambda<T: Real>(lambda: T, r: T) -> (T, T) {
    let x = lambda * r * r;
    if x.abs() < T::lit(SERIES_CUTOFF) {
        // sn = r (1 - x/6 + x^2/120 - x^3/5040), cn = 1 - x/2 + x^2/24 - x^3/720
        let sn = r * (T::one() - x / T::lit(6.0) + x * x / T::lit(120.0)
            - x * x * x / T::lit(5040.0));
        let cn = T::one() - x / T::lit(2.0) + x * x / T::lit(24.0) - x * x * x / T::lit(720.0);
        (sn, cn)
    } else if lambda > T::zero() {
        let k = lambda.sqrt();
        ((k * r).sin() / k, (k * r).cos())
    } else {
        let k = (-lambda).sqrt();
        ((k * r).sinh() / k, (k * r).cosh())
    }
}

/// `int_0^r sn_lambda`, the area density of a disc of radius `r` per radian.
pub fn sn_integral<T: Real>(lambda: T, r: T) -> T {
    let x = lambda * r * r;
    if x.abs() < T::lit(SERIES_CUTOFF) {
        r * r
            * (T::lit(0.5) - x / T::lit(24.0) + x * x / T::lit(720.0)
                - x * x * x / T::lit(40320.0))
    } else {
        (T::one() - sn_lambda(lambda, r).1) / lambda
    }
}

/// Largest admissible chart radius: `0.95 pi / sqrt(lambda)` for positive
/// curvature, unbounded otherwise.
pub fn r_max<T: Real>(lambda: T) -> T {
    if lambda > T::zero() {
        T::lit(0.95) * T::pi() / lambda.sqrt()
    } else {
        T::max_value().unwrap_or_else(|| T::lit(f64::MAX))
    }
}

/// Smallest admissible chart radius.
pub const R_MIN: f64 = 0.05;

/// Linear-model point `(cn(r), sn(r) cos t, sn(r) sin t)`. It lies on
/// `x0^2 + lambda (x1^2 + x2^2) = 1` and the curvature-`lambda` matrix
/// group acts on it linearly.
pub fn embed_point<T: Real>(lambda: T, r: T, theta: T) -> DVector<T> {
    let (sn, cn) = sn_lambda(lambda, r);
    DVector::from_vec(vec![cn, sn * theta.cos(), sn * theta.sin()])
}

/// Inverse of [`embed_point`]; returns `(r, theta)` with `theta` in `(-pi, pi]`.
pub fn chart_from_embedded<T: Real>(lambda: T, x: &DVector<T>) -> (T, T) {
    let rho = (x[1] * x[1] + x[2] * x[2]).sqrt();
    let theta = x[2].atan2(x[1]);
    let r = if lambda > T::zero() {
        let k = lambda.sqrt();
        (k * rho).atan2(x[0]) / k
    } else if lambda < T::zero() {
        let k = (-lambda).sqrt();
        (k * rho).asinh() / k
    } else {
        rho
    };
    (r, theta)
}

/// Chart components `(dr, dtheta)` of a linear-model velocity `v` at the
/// chart point `(r, theta)`.
pub fn chart_velocity<T: Real>(lambda: T, r: T, theta: T, v: &DVector<T>) -> (T, T) {
    let (sn, cn) = sn_lambda(lambda, r);
    let (s, c) = (theta.sin(), theta.cos());
    let radial = v[1] * c + v[2] * s;
    let angular = -v[1] * s + v[2] * c;
    (cn * radial - sn * v[0], angular / sn)
}
