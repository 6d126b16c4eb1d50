use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::warp::sn_lambda;
use super::{AmbientModel, ChartPoint};
use crate::lie_bundle::{algebra_basis, commutator};
use crate::linalg::vectorize;
use crate::scalar::Real;

type FieldFn<T> = dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync;

/// A vector field given by its chart components.
#[derive(Clone)]
pub struct TangentVectorField<T: Real> {
    pub name: String,
    rule: Arc<FieldFn<T>>,
}

impl<T: Real> fmt::Debug for TangentVectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentVectorField").field("name", &self.name).finish()
    }
}

impl<T: Real> TangentVectorField<T> {
    pub fn new(
        name: impl Into<String>,
        rule: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn eval(&self, coords: &DVector<T>) -> DVector<T> {
        (self.rule)(coords)
    }
}

/// Rotation about the chart origin plus the two transvections through it,
/// in the warped polar chart of curvature `lambda`.
fn polar_fields<T: Real>(lambda: T, dim: usize) -> Vec<TangentVectorField<T>> {
    let pad = move |a: T, b: T| {
        let mut v = DVector::zeros(dim);
        v[0] = a;
        v[1] = b;
        v
    };
    vec![
        TangentVectorField::new("rotation", move |_c: &DVector<T>| pad(T::zero(), T::one())),
        TangentVectorField::new("transvection_1", move |c: &DVector<T>| {
            let (sn, cn) = sn_lambda(lambda, c[0]);
            pad(c[1].cos(), -cn / sn * c[1].sin())
        }),
        TangentVectorField::new("transvection_2", move |c: &DVector<T>| {
            let (sn, cn) = sn_lambda(lambda, c[0]);
            pad(c[1].sin(), cn / sn * c[1].cos())
        }),
    ]
}

/// Basis of the Killing fields of the model.
///
/// The product model exposes only the splitting-preserving family (three
/// horizontal fields and the vertical translation) at every `k`, so the
/// fibre dimension is constant along the family.
pub fn killing_fields<T: Real>(model: &AmbientModel<T>) -> Vec<TangentVectorField<T>> {
    match model {
        AmbientModel::SpaceForm2 { lambda } => polar_fields(*lambda, 2),
        AmbientModel::ScaledSphere { .. } => polar_fields(T::one(), 2),
        AmbientModel::ProductM2kR { k } => {
            let mut f = polar_fields(*k, 3);
            f.push(TangentVectorField::new("vertical", |_c: &DVector<T>| {
                DVector::from_vec(vec![T::zero(), T::zero(), T::one()])
            }));
            f
        }
        AmbientModel::FlatTorus { .. } => vec![
            TangentVectorField::new("translation_x", |_c: &DVector<T>| {
                DVector::from_vec(vec![T::one(), T::zero()])
            }),
            TangentVectorField::new("translation_y", |_c: &DVector<T>| {
                DVector::from_vec(vec![T::zero(), T::one()])
            }),
        ],
    }
}

pub fn killing_fields_at<T: Real>(
    model: &AmbientModel<T>,
    p: &ChartPoint<T>,
) -> crate::Result<Vec<DVector<T>>> {
    model.check_point(p)?;
    Ok(killing_fields(model).iter().map(|f| f.eval(&p.coords)).collect())
}

fn shifted<T: Real>(c: &DVector<T>, i: usize, h: T) -> DVector<T> {
    let mut x = c.clone();
    x[i] += h;
    x
}

/// Frobenius norm of the central-difference Lie derivative `L_K g` at `p`:
/// `(L_K g)_ij = K^m d_m g_ij + g_mj d_i K^m + g_im d_j K^m`.
pub fn killing_residual<T: Real>(
    model: &AmbientModel<T>,
    field: &TangentVectorField<T>,
    p: &ChartPoint<T>,
    h: T,
) -> T {
    let c = &p.coords;
    let d = c.len();
    let two_h = h + h;
    let g = model.metric_unchecked(c);
    let k = field.eval(c);
    let dg: Vec<DMatrix<T>> = (0..d)
        .map(|m| (model.metric_unchecked(&shifted(c, m, h)) - model.metric_unchecked(&shifted(c, m, -h))) / two_h)
        .collect();
    // dk[(m, i)] = d_i K^m
    let mut dk = DMatrix::zeros(d, d);
    for i in 0..d {
        let diff = (field.eval(&shifted(c, i, h)) - field.eval(&shifted(c, i, -h))) / two_h;
        dk.set_column(i, &diff);
    }
    let mut lie = DMatrix::zeros(d, d);
    for m in 0..d {
        lie += &dg[m] * k[m];
    }
    let term = g.transpose() * &dk; // (i, j) -> sum_m g_mi d_j K^m
    lie += &term + term.transpose();
    lie.norm()
}

/// Central-difference vector-field bracket `[A, B]^i = A^j d_j B^i - B^j d_j A^i`.
fn field_bracket<T: Real>(
    a: &TangentVectorField<T>,
    b: &TangentVectorField<T>,
    c: &DVector<T>,
    h: T,
) -> DVector<T> {
    let two_h = h + h;
    let (av, bv) = (a.eval(c), b.eval(c));
    let mut out = DVector::zeros(c.len());
    for j in 0..c.len() {
        let db = (b.eval(&shifted(c, j, h)) - b.eval(&shifted(c, j, -h))) / two_h;
        let da = (a.eval(&shifted(c, j, h)) - a.eval(&shifted(c, j, -h))) / two_h;
        out += db * av[j] - da * bv[j];
    }
    out
}

/// Largest deviation between the structure constants of the chart Killing
/// fields `(rotation, transvection_1, transvection_2)` of the curvature-`lambda`
/// plane and those of the matrix basis `(L(E_12, 0), L(0, e_1), L(0, e_2))`.
///
/// Three vectors in a 2-D tangent space are dependent, so the bracket of
/// each pair is decomposed against the fields sampled at `p` and three
/// nearby points jointly.
pub fn structure_match<T: Real>(lambda: T, p: &ChartPoint<T>, h: T) -> T {
    let fields = polar_fields(lambda, 2);
    let offsets = [(0.0, 0.0), (0.1, 0.0), (0.0, 0.4), (0.05, 0.9)];
    let points: Vec<DVector<T>> = offsets
        .iter()
        .map(|&(dr, dt)| {
            DVector::from_vec(vec![p.coords[0] + T::lit(dr), p.coords[1] + T::lit(dt)])
        })
        .collect();
    let rows = 2 * points.len();
    let design = DMatrix::from_fn(rows, 3, |r, f| fields[f].eval(&points[r / 2])[r % 2]);
    let design_pinv = design.clone().pseudo_inverse(T::lit(1e-12)).expect("pseudo-inverse");

    let basis = algebra_basis(lambda, 2).expect("n = 2").matrices();
    let stacked = crate::lie_bundle::algebra::stack_columns(&basis);
    let basis_pinv = stacked.pseudo_inverse(T::lit(1e-12)).expect("pseudo-inverse");

    let mut worst = T::zero();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let target = DVector::from_fn(rows, |r, _| {
                field_bracket(&fields[i], &fields[j], &points[r / 2], h)[r % 2]
            });
            let chart_coeffs = &design_pinv * target;
            let matrix_coeffs = &basis_pinv * vectorize(&commutator(&basis[i], &basis[j]));
            let dev = (chart_coeffs - matrix_coeffs).amax();
            if dev > worst {
                worst = dev;
            }
        }
    }
    worst
}
