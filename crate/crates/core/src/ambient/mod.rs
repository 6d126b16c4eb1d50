//! Riemannian ambient models in explicit charts, with their Killing fields.
//!
//! * `SpaceForm2(lambda)`: geodesic-polar chart `(r, theta)`, metric
//!   `dr^2 + sn_lambda(r)^2 dtheta^2`, valid for every sign of `lambda`.
//! * `ProductM2kR(k)`: chart `(r, theta, z)`, metric `dr^2 + sn_k(r)^2 dtheta^2 + dz^2`.
//! * `FlatTorus(Q)`: chart `(x, y)` with period 1 in both coordinates and
//!   constant Gram matrix `Q`.
//! * `ScaledSphere(lambda)`: spherical chart `(polar, azimuth)` with metric
//!   `(1/lambda)(dpolar^2 + sin^2(polar) dazimuth^2)`.

mod killing;
pub mod warp;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::Real;

pub use killing::{killing_fields, killing_fields_at, killing_residual, structure_match, TangentVectorField};
pub use warp::{chart_from_embedded, chart_velocity, embed_point, r_max, sn_integral, sn_lambda, R_MIN};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AmbientModel<T: Real> {
    SpaceForm2 { lambda: T },
    ProductM2kR { k: T },
    FlatTorus { q: Matrix2<T> },
    ScaledSphere { lambda: T },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartPoint<T: Real> {
    pub coords: DVector<T>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(coords: &[T]) -> Self {
        Self {
            coords: DVector::from_column_slice(coords),
        }
    }
}

impl<T: Real> AmbientModel<T> {
    pub fn space_form(lambda: T) -> Self {
        Self::SpaceForm2 { lambda }
    }

    pub fn product(k: T) -> Self {
        Self::ProductM2kR { k }
    }

    pub fn flat_torus(q: Matrix2<T>) -> Result<Self> {
        if (q - q.transpose()).iter().any(|x| *x != T::zero()) {
            return Err(domain("torus Gram matrix is not symmetric"));
        }
        if q[(0, 0)] <= T::zero() || q.determinant() <= T::zero() {
            return Err(domain("torus Gram matrix is not positive-definite"));
        }
        Ok(Self::FlatTorus { q })
    }

    pub fn scaled_sphere(lambda: T) -> Result<Self> {
        if lambda <= T::zero() {
            return Err(domain("sphere scale must be positive"));
        }
        Ok(Self::ScaledSphere { lambda })
    }

    pub fn chart_dim(&self) -> usize {
        match self {
            Self::ProductM2kR { .. } => 3,
            _ => 2,
        }
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            Self::SpaceForm2 { .. } => &["r", "theta"],
            Self::ProductM2kR { .. } => &["r", "theta", "z"],
            Self::FlatTorus { .. } => &["x", "y"],
            Self::ScaledSphere { .. } => &["polar", "azimuth"],
        }
    }

    /// Period of each chart coordinate, `None` when the coordinate is not periodic.
    pub fn periods(&self) -> Vec<Option<T>> {
        let two_pi = T::two_pi();
        match self {
            Self::SpaceForm2 { .. } => vec![None, Some(two_pi)],
            Self::ProductM2kR { .. } => vec![None, Some(two_pi), None],
            Self::FlatTorus { .. } => vec![Some(T::one()), Some(T::one())],
            Self::ScaledSphere { .. } => vec![None, Some(two_pi)],
        }
    }

    pub(crate) fn check_point(&self, p: &ChartPoint<T>) -> Result<()> {
        if p.coords.len() != self.chart_dim() {
            return Err(crate::Error::Shape(format!(
                "chart point has {} coordinates, model expects {}",
                p.coords.len(),
                self.chart_dim()
            )));
        }
        match self {
            Self::SpaceForm2 { .. } | Self::ProductM2kR { .. } if p.coords[0] <= T::zero() => {
                Err(domain("polar chart needs r > 0"))
            }
            Self::ScaledSphere { .. }
                if p.coords[0] <= T::zero() || p.coords[0] >= T::pi() =>
            {
                Err(domain("spherical chart needs 0 < polar < pi"))
            }
            _ => Ok(()),
        }
    }

    /// Metric matrix in chart coordinates.
    pub fn metric_at(&self, p: &ChartPoint<T>) -> Result<DMatrix<T>> {
        self.check_point(p)?;
        let c = &p.coords;
        Ok(match self {
            Self::SpaceForm2 { lambda } => {
                let sn = sn_lambda(*lambda, c[0]).0;
                DMatrix::from_diagonal(&DVector::from_vec(vec![T::one(), sn * sn]))
            }
            Self::ProductM2kR { k } => {
                let sn = sn_lambda(*k, c[0]).0;
                DMatrix::from_diagonal(&DVector::from_vec(vec![T::one(), sn * sn, T::one()]))
            }
            Self::FlatTorus { q } => DMatrix::from_column_slice(2, 2, q.as_slice()),
            Self::ScaledSphere { lambda } => {
                let s = c[0].sin();
                DMatrix::from_diagonal(&DVector::from_vec(vec![
                    T::one() / *lambda,
                    s * s / *lambda,
                ]))
            }
        })
    }

    /// Metric without the chart-domain check; used by finite differences
    /// that may step a hair outside a boundary.
    pub(crate) fn metric_unchecked(&self, c: &DVector<T>) -> DMatrix<T> {
        self.metric_at(&ChartPoint { coords: c.clone() })
            .unwrap_or_else(|_| DMatrix::from_element(c.len(), c.len(), T::lit(f64::NAN)))
    }
}
