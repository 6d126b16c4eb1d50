//! Equivariant continuation of symmetric variational problems.
//!
//! The crate builds the bundle of space-form isometry groups as explicit
//! matrix groups, discretizes invariant geometric functionals (constant
//! geodesic/mean curvature curves and profiles, harmonic loops), certifies
//! that the Jacobi kernel is exactly the span of Killing-Jacobi fields, and
//! continues solution branches on a slice transversal to the group orbits
//! while the ambient geometry changes type.

pub mod ambient;
pub mod continuation;
pub mod equivariance;
pub mod error;
pub mod lie_bundle;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod variational;

pub use error::{Error, Result};
pub use scalar::Real;

pub type AlgebraElement = lie_bundle::AlgebraElement<f64>;
pub type AlgebraBasis = lie_bundle::AlgebraBasis<f64>;
pub type QuadraticForm = lie_bundle::QuadraticForm<f64>;
pub type SliceElement = lie_bundle::SliceElement<f64>;
pub type GroupWord = lie_bundle::GroupWord<f64>;
pub type ReductivePair = lie_bundle::ReductivePair<f64>;
pub type PairElement = lie_bundle::PairElement<f64>;
pub type AmbientModel = ambient::AmbientModel<f64>;
pub type ChartPoint = ambient::ChartPoint<f64>;
pub type Grid = mesh::Grid<f64>;
pub type Pairing = mesh::Pairing<f64>;

pub type AlgebraBasisF32 = lie_bundle::AlgebraBasis<f32>;
pub type AmbientModelF32 = ambient::AmbientModel<f32>;
pub type GridF32 = mesh::Grid<f32>;
