//! Discretized invariant functionals, their gradient-like residuals,
//! Jacobi operators and Killing–Jacobi fields.
//!
//! Every instance is a sum over quadrature points of a pointwise
//! Lagrangian `L(x, u, u')`. Residuals and Jacobi operators are the exact
//! first and second derivatives of that finite sum, divided by the
//! pairing weights, so `W J` is symmetric by construction.
//!
//! Instances and their deformation parameter `lambda_hat`:
//!
//! * `CmcCircle`: radial graphs `r(theta)` in the space form of curvature
//!   `lambda_hat`; `f = Length - H * Area`, with the sign chosen so that
//!   geodesic circles of curvature `H` (inward normal) are critical.
//! * `CmcProfile`: axisymmetric profiles `rho(z)` in `M^2(k) x R` with
//!   `k = lambda_hat`, fixed end radii; `f = Area - H * Volume`, `H` the sum
//!   of principal curvatures.
//! * `HarmonicTorus`: loops in a flat torus with Gram matrix
//!   `(1 - t) Q0 + t Q1`, `t = lambda_hat`, in a fixed homotopy class.
//! * `HarmonicSphere`: loops in the round sphere of curvature `lambda_hat`
//!   winding once around the polar axis.
//!
//! Harmonic maps are parametrized by `s in [0, 1)`, `s = theta / 2 pi`.

mod action;
mod lagrangian;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Serialize, Serializer};

use crate::ambient::{
    killing_fields_at, r_max, sn_integral, sn_lambda, AmbientModel, ChartPoint, R_MIN,
};
use crate::error::{domain, Error, Result};
use crate::mesh::{pairing_weights, DiffOrder, Grid, GridKind, Pairing, TrigInterpolant};

pub use action::generator_names;

/// Problem instance data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Instance {
    CmcCircle { h: f64 },
    CmcProfile { h: f64, radii: (f64, f64) },
    HarmonicTorus { class: (i64, i64), q0: Matrix2<f64>, q1: Matrix2<f64> },
    HarmonicSphere,
}

#[derive(Debug, Clone, Serialize)]
pub struct Problem {
    pub instance: Instance,
    pub grid: Grid<f64>,
    /// Background density at the nodes; multiplies the quadrature weights.
    pub density: DVector<f64>,
}

/// Node values of a discrete configuration. Harmonic states store chart
/// components component-major: `[u_1(theta_0..), u_2(theta_0..)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemState {
    pub values: DVector<f64>,
}

impl Serialize for ProblemState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ProblemState", 1)?;
        st.serialize_field("values", self.values.as_slice())?;
        st.end()
    }
}

impl ProblemState {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }
}

/// `J = W^-1 Hess` together with the pairing it is symmetric for.
#[derive(Debug, Clone)]
pub struct JacobiOperator {
    pub matrix: DMatrix<f64>,
    pub pairing: Pairing<f64>,
    pub lambda_hat: f64,
}

impl JacobiOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `W J`, the discrete Hessian.
    pub fn weighted(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        for (i, w) in self.pairing.weights.iter().enumerate() {
            m.row_mut(i).scale_mut(*w);
        }
        m
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

impl Problem {
    pub fn cmc_circle(h: f64, grid: Grid<f64>) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(domain("CMC circles need a periodic grid"));
        }
        if !h.is_finite() {
            return Err(domain("mean curvature must be finite"));
        }
        Ok(Self::with_unit_density(Instance::CmcCircle { h }, grid))
    }

    pub fn cmc_profile(h: f64, grid: Grid<f64>, radii: (f64, f64)) -> Result<Self> {
        if grid.is_periodic() {
            return Err(domain("CMC profiles need an interval grid"));
        }
        if !(radii.0 > 0.0 && radii.1 > 0.0) {
            return Err(domain("boundary radii must be positive"));
        }
        Ok(Self::with_unit_density(Instance::CmcProfile { h, radii }, grid))
    }

    pub fn harmonic_torus(
        class: (i64, i64),
        grid: Grid<f64>,
        q0: Matrix2<f64>,
        q1: Matrix2<f64>,
    ) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(domain("harmonic loops need a periodic grid"));
        }
        AmbientModel::flat_torus(q0)?;
        AmbientModel::flat_torus(q1)?;
        Ok(Self::with_unit_density(Instance::HarmonicTorus { class, q0, q1 }, grid))
    }

    pub fn harmonic_sphere(grid: Grid<f64>) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(domain("harmonic loops need a periodic grid"));
        }
        Ok(Self::with_unit_density(Instance::HarmonicSphere, grid))
    }

    fn with_unit_density(instance: Instance, grid: Grid<f64>) -> Self {
        let density = DVector::from_element(grid.len(), 1.0);
        Self {
            instance,
            grid,
            density,
        }
    }

    pub fn with_density(mut self, density: DVector<f64>) -> Result<Self> {
        pairing_weights(&self.grid, &density)?;
        self.density = density;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.instance {
            Instance::CmcCircle { .. } => "cmc_circle",
            Instance::CmcProfile { .. } => "cmc_profile",
            Instance::HarmonicTorus { .. } => "harmonic_torus",
            Instance::HarmonicSphere => "harmonic_sphere",
        }
    }

    /// Ambient model at parameter `lambda_hat`.
    pub fn model(&self, lambda_hat: f64) -> Result<AmbientModel<f64>> {
        match &self.instance {
            Instance::CmcCircle { .. } => Ok(AmbientModel::space_form(lambda_hat)),
            Instance::CmcProfile { .. } => Ok(AmbientModel::product(lambda_hat)),
            Instance::HarmonicTorus { q0, q1, .. } => {
                let q = q0 * (1.0 - lambda_hat) + q1 * lambda_hat;
                AmbientModel::flat_torus(q)
            }
            Instance::HarmonicSphere => AmbientModel::scaled_sphere(lambda_hat),
        }
    }

    /// Number of scalar fields per node.
    pub fn components(&self) -> usize {
        match self.instance {
            Instance::CmcCircle { .. } | Instance::CmcProfile { .. } => 1,
            _ => 2,
        }
    }

    /// Length of a full state vector.
    pub fn state_len(&self) -> usize {
        self.components() * self.grid.len()
    }

    /// Indices of the unknowns; the pinned ends of a profile are excluded.
    pub fn free_indices(&self) -> Vec<usize> {
        match self.instance {
            Instance::CmcProfile { .. } => (1..self.grid.len() - 1).collect(),
            _ => (0..self.state_len()).collect(),
        }
    }

    pub fn free_dim(&self) -> usize {
        self.free_indices().len()
    }

    pub fn free_values(&self, state: &ProblemState) -> DVector<f64> {
        let idx = self.free_indices();
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| state.values[i]))
    }

    /// Adds `delta` (free coordinates) to a state.
    pub fn displace(&self, state: &ProblemState, delta: &DVector<f64>) -> ProblemState {
        let mut values = state.values.clone();
        for (k, &i) in self.free_indices().iter().enumerate() {
            values[i] += delta[k];
        }
        ProblemState { values }
    }

    /// Pairing on the free coordinates.
    pub fn pairing(&self) -> Pairing<f64> {
        let base = pairing_weights(&self.grid, &self.density).expect("density validated");
        match self.instance {
            Instance::CmcProfile { .. } => {
                let n = base.dim();
                Pairing {
                    weights: base.weights.rows(1, n - 2).into_owned(),
                }
            }
            _ => base.repeated(self.components()),
        }
    }

    /// Per-component winding added to the periodic part of a harmonic loop.
    fn winding(&self) -> [f64; 2] {
        match self.instance {
            Instance::HarmonicTorus { class, .. } => [class.0 as f64, class.1 as f64],
            Instance::HarmonicSphere => [0.0, std::f64::consts::TAU],
            _ => [0.0, 0.0],
        }
    }

    pub(crate) fn check_state(&self, state: &ProblemState, lambda_hat: f64) -> Result<()> {
        if state.values.len() != self.state_len() {
            return Err(Error::Shape(format!(
                "state has {} values, expected {}",
                state.values.len(),
                self.state_len()
            )));
        }
        if state.values.iter().any(|v| !v.is_finite()) {
            return Err(domain("state has non-finite values"));
        }
        if !lambda_hat.is_finite() {
            return Err(domain("parameter is not finite"));
        }
        match &self.instance {
            Instance::CmcCircle { .. } => {
                let hi = r_max(lambda_hat);
                if let Some(r) = state.values.iter().find(|&&r| !(R_MIN..=hi).contains(&r)) {
                    let upper = if hi < f64::MAX { format!("{hi}]") } else { "inf)".into() };
                    return Err(domain(format!(
                        "radius {r} outside the radial-graph domain [{R_MIN}, {upper}"
                    )));
                }
            }
            Instance::CmcProfile { radii, .. } => {
                let hi = r_max(lambda_hat);
                if state.values.iter().any(|&r| !(r > 0.0 && r < hi)) {
                    return Err(domain("profile radius must be positive and inside the chart"));
                }
                let n = state.values.len();
                if state.values[0] != radii.0 || state.values[n - 1] != radii.1 {
                    return Err(domain("profile end radii differ from the prescribed values"));
                }
            }
            Instance::HarmonicTorus { .. } => {
                self.model(lambda_hat)?;
            }
            Instance::HarmonicSphere => {
                self.model(lambda_hat)?;
                let n = self.grid.len();
                if state.values.rows(0, n).iter().any(|&t| !(t > 0.0 && t < std::f64::consts::PI)) {
                    return Err(domain("loop touches a pole of the polar chart"));
                }
            }
        }
        Ok(())
    }

    /// Built-in critical seed at `lambda_hat`: the geodesic circle of
    /// curvature `H`, the cylinder between the end radii, the straight
    /// loop in its class, or the equator.
    pub fn analytic_seed(&self, lambda_hat: f64) -> Result<ProblemState> {
        let n = self.grid.len();
        let nodes = &self.grid.nodes;
        let values = match &self.instance {
            Instance::CmcCircle { h } => {
                DVector::from_element(n, geodesic_circle_radius(lambda_hat, *h)?)
            }
            Instance::CmcProfile { radii, .. } => {
                let (a, b) = (nodes[0], nodes[n - 1]);
                let mut v = nodes.map(|z| radii.0 + (radii.1 - radii.0) * (z - a) / (b - a));
                v[0] = radii.0;
                v[n - 1] = radii.1;
                v
            }
            Instance::HarmonicTorus { .. } | Instance::HarmonicSphere => {
                let w = self.winding();
                let base = if matches!(self.instance, Instance::HarmonicSphere) {
                    [std::f64::consts::FRAC_PI_2, 0.0]
                } else {
                    [0.0, 0.0]
                };
                let tau = std::f64::consts::TAU;
                DVector::from_fn(2 * n, |i, _| {
                    let c = i / n;
                    base[c] + w[c] * nodes[i % n] / tau
                })
            }
        };
        let state = ProblemState { values };
        self.check_state(&state, lambda_hat)?;
        Ok(state)
    }

    pub fn value(&self, state: &ProblemState, lambda_hat: f64) -> Result<f64> {
        self.check_state(state, lambda_hat)?;
        Ok(lagrangian::assemble(self, state, lambda_hat, lagrangian::Level::Value)?.value)
    }

    pub fn residual(&self, state: &ProblemState, lambda_hat: f64) -> Result<DVector<f64>> {
        self.check_state(state, lambda_hat)?;
        let a = lagrangian::assemble(self, state, lambda_hat, lagrangian::Level::Gradient)?;
        let w = self.pairing().weights;
        let idx = self.free_indices();
        Ok(DVector::from_fn(idx.len(), |k, _| a.gradient[idx[k]] / w[k]))
    }

    /// `W`-norm of the residual.
    pub fn residual_norm(&self, state: &ProblemState, lambda_hat: f64) -> Result<f64> {
        let r = self.residual(state, lambda_hat)?;
        Ok(self.pairing().norm(&r))
    }

    pub fn jacobi(&self, state: &ProblemState, lambda_hat: f64) -> Result<JacobiOperator> {
        self.check_state(state, lambda_hat)?;
        let a = lagrangian::assemble(self, state, lambda_hat, lagrangian::Level::Hessian)?;
        let hess = a.hessian.expect("hessian requested");
        let idx = self.free_indices();
        let pairing = self.pairing();
        let mut matrix = hess.select_rows(&idx).select_columns(&idx);
        matrix = (&matrix + matrix.transpose()) * 0.5;
        for (k, w) in pairing.weights.iter().enumerate() {
            matrix.row_mut(k).unscale_mut(*w);
        }
        Ok(JacobiOperator {
            matrix,
            pairing,
            lambda_hat,
        })
    }

    /// Jacobi fields induced by the symmetry group, one per generator (see
    /// [`generator_names`]), in free coordinates.
    pub fn killing_jacobi_basis(
        &self,
        state: &ProblemState,
        lambda_hat: f64,
    ) -> Result<Vec<DVector<f64>>> {
        self.check_state(state, lambda_hat)?;
        let model = self.model(lambda_hat)?;
        let n = self.grid.len();
        match &self.instance {
            Instance::CmcCircle { .. } => {
                let r = &state.values;
                let dr = &self.grid.diff1 * r;
                let mut cols = vec![DVector::zeros(n); 3];
                for j in 0..n {
                    let p = ChartPoint::new(&[r[j], self.grid.nodes[j]]);
                    for (i, k) in killing_fields_at(&model, &p)?.iter().enumerate() {
                        // normal speed of the graph under the flow of K
                        cols[i][j] = k[0] - k[1] * dr[j];
                    }
                }
                Ok(cols)
            }
            Instance::CmcProfile { .. } => Ok(Vec::new()),
            Instance::HarmonicTorus { .. } | Instance::HarmonicSphere => {
                let mut cols = Vec::new();
                let points: Vec<ChartPoint<f64>> = (0..n)
                    .map(|j| ChartPoint::new(&[state.values[j], state.values[n + j]]))
                    .collect();
                let per_node: Vec<Vec<DVector<f64>>> = points
                    .iter()
                    .map(|p| killing_fields_at(&model, p))
                    .collect::<Result<_>>()?;
                for i in 0..per_node[0].len() {
                    cols.push(DVector::from_fn(2 * n, |k, _| per_node[k % n][i][k / n]));
                }
                cols.push(self.tangent(state));
                Ok(cols)
            }
        }
    }

    /// `d phi / d theta` at the nodes, component-major.
    fn tangent(&self, state: &ProblemState) -> DVector<f64> {
        let n = self.grid.len();
        let w = self.winding();
        let psi = self.periodic_part(state);
        let mut out = DVector::zeros(2 * n);
        for c in 0..2 {
            let d = &self.grid.diff1 * psi.rows(c * n, n);
            for j in 0..n {
                out[c * n + j] = d[j] + w[c] / std::f64::consts::TAU;
            }
        }
        out
    }

    /// State minus the linear winding; periodic for harmonic loops.
    pub(crate) fn periodic_part(&self, state: &ProblemState) -> DVector<f64> {
        let n = self.grid.len();
        let w = self.winding();
        let tau = std::f64::consts::TAU;
        DVector::from_fn(state.values.len(), |i, _| {
            let c = (i / n).min(1);
            state.values[i] - w[c] * self.grid.nodes[i % n] / tau
        })
    }

    /// Geodesic curvature of a radial graph, positive for circles about
    /// the chart origin.
    pub fn geodesic_curvature(&self, state: &ProblemState, lambda_hat: f64) -> Result<DVector<f64>> {
        if !matches!(self.instance, Instance::CmcCircle { .. }) {
            return Err(Error::Unsupported(
                "geodesic curvature is defined for CMC circles only".into(),
            ));
        }
        self.check_state(state, lambda_hat)?;
        let r = &state.values;
        let d1 = &self.grid.diff1 * r;
        let d2 = &self.grid.diff2 * r;
        Ok(DVector::from_fn(r.len(), |j, _| {
            let (s, c) = sn_lambda(lambda_hat, r[j]);
            let (p, pp) = (d1[j], d2[j]);
            let q = (p * p + s * s).sqrt();
            (c * s * s + 2.0 * c * p * p - s * pp) / (q * q * q)
        }))
    }

    /// Number of group generators acting on states.
    pub fn generator_count(&self) -> usize {
        generator_names(&self.instance).len()
    }

    /// Applies `exp(sum_i t_i X_i)` (one coefficient per generator).
    pub fn apply_motion(
        &self,
        state: &ProblemState,
        lambda_hat: f64,
        t: &[f64],
    ) -> Result<ProblemState> {
        self.check_state(state, lambda_hat)?;
        if t.len() != self.generator_count() {
            return Err(Error::Shape(format!(
                "{} motion coefficients for {} generators",
                t.len(),
                self.generator_count()
            )));
        }
        let moved = action::apply(self, state, lambda_hat, t)?;
        self.check_state(&moved, lambda_hat)?;
        Ok(moved)
    }

    /// Named instance-specific scalars recorded along branches.
    pub fn derived_scalars(
        &self,
        state: &ProblemState,
        lambda_hat: f64,
    ) -> Result<BTreeMap<String, f64>> {
        self.check_state(state, lambda_hat)?;
        let mut out = BTreeMap::new();
        let q = &self.grid.quadrature;
        match &self.instance {
            Instance::CmcCircle { h } => {
                let r = &q.values * &state.values;
                let area: f64 = r
                    .iter()
                    .zip(q.weights.iter())
                    .map(|(r, w)| w * sn_integral(lambda_hat, *r))
                    .sum();
                let kappa = self.geodesic_curvature(state, lambda_hat)?;
                out.insert("enclosed_area".into(), area);
                out.insert(
                    "best_fit_radius".into(),
                    inverse_sn_integral(lambda_hat, area / std::f64::consts::TAU)?,
                );
                out.insert(
                    "max_curvature_defect".into(),
                    kappa.iter().map(|k| (k - h).abs()).fold(0.0, f64::max),
                );
            }
            Instance::CmcProfile { .. } => {
                let res = self.residual(state, lambda_hat)?;
                let idx = self.free_indices();
                let defect = idx
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| {
                        let s = sn_lambda(lambda_hat, state.values[i]).0;
                        (res[k] / (std::f64::consts::TAU * s)).abs()
                    })
                    .fold(0.0, f64::max);
                out.insert("max_mean_curvature_defect".into(), defect);
                let n = state.values.len();
                out.insert("neck_radius".into(), state.values.min());
                out.insert("mid_radius".into(), state.values[n / 2]);
            }
            Instance::HarmonicTorus { .. } | Instance::HarmonicSphere => {
                let length = lagrangian::loop_length(self, state, lambda_hat)?;
                out.insert("length".into(), length);
                if matches!(self.instance, Instance::HarmonicSphere) {
                    out.insert("length_times_sqrt_lambda".into(), length * lambda_hat.sqrt());
                }
            }
        }
        Ok(out)
    }

    /// Smooth test direction built from low Fourier or sine modes, in free
    /// coordinates; `coeffs` supplies one coefficient per mode.
    pub fn smooth_direction(&self, coeffs: &mut dyn FnMut() -> f64) -> DVector<f64> {
        let nodes = &self.grid.nodes;
        match self.grid.kind {
            GridKind::Periodic { n } => {
                let c = self.components();
                let mut v = DVector::zeros(c * n);
                for comp in 0..c {
                    let mut field = DVector::from_element(n, coeffs());
                    for k in 1..=4 {
                        let (a, b) = (coeffs(), coeffs());
                        let kf = k as f64;
                        field += nodes.map(|t| a * (kf * t).cos() + b * (kf * t).sin());
                    }
                    v.rows_mut(comp * n, n).copy_from(&field);
                }
                v
            }
            GridKind::Dirichlet { n, a, b } => {
                let mut field = DVector::zeros(n - 2);
                for m in 1..=4 {
                    let c = coeffs();
                    let mf = m as f64 * std::f64::consts::PI / (b - a);
                    for j in 1..n - 1 {
                        field[j - 1] += c * (mf * (nodes[j] - a)).sin();
                    }
                }
                field
            }
        }
    }
}

/// Radius `rho` of the geodesic circle of curvature `h` in the space form
/// of curvature `lambda`: `sqrt(lambda) cot(sqrt(lambda) rho) = h`,
/// `1 / rho = h`, or `sqrt(-lambda) coth(sqrt(-lambda) rho) = h`.
pub fn geodesic_circle_radius(lambda: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(domain("geodesic circles need positive curvature"));
    }
    let rho = if lambda > 0.0 {
        let k = lambda.sqrt();
        (k / h).atan() / k
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        if k >= h {
            return Err(domain(format!(
                "no closed circle of curvature {h} at curvature {lambda}"
            )));
        }
        (k / h).atanh() / k
    } else {
        1.0 / h
    };
    Ok(rho)
}

/// Solves `sn_integral(lambda, rho) = a` for `rho >= 0`.
pub fn inverse_sn_integral(lambda: f64, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(domain("negative enclosed area"));
    }
    if lambda > 0.0 && a >= 2.0 / lambda {
        return Err(domain("area exceeds the sphere"));
    }
    let mut rho = (2.0 * a).sqrt();
    for _ in 0..60 {
        let f = sn_integral(lambda, rho) - a;
        let s = sn_lambda(lambda, rho).0;
        if s == 0.0 {
            break;
        }
        let step = f / s;
        rho -= step;
        if step.abs() <= 1e-16 * rho.abs().max(1.0) {
            break;
        }
    }
    Ok(rho)
}

/// Default grid for an instance: spectral periodic or fourth-order interval.
pub fn default_grid(periodic: bool, n: usize, interval: (f64, f64)) -> Result<Grid<f64>> {
    if periodic {
        crate::mesh::build_grid(GridKind::Periodic { n }, DiffOrder::Spectral)
    } else {
        crate::mesh::build_grid(
            GridKind::Dirichlet {
                n,
                a: interval.0,
                b: interval.1,
            },
            DiffOrder::Fourth,
        )
    }
}

/// Interpolant of a periodic node vector.
pub(crate) fn interpolant(values: &DVector<f64>) -> TrigInterpolant<f64> {
    TrigInterpolant::new(values)
}

#[cfg(test)]
mod tests;
