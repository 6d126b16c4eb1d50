//! One-dimensional grids: the periodic circle `[0, 2 pi)` and closed
//! intervals with Dirichlet ends.
//!
//! Besides nodal differentiation matrices each grid carries a
//! [`QuadratureMap`]: linear maps from nodal values to values and first
//! derivatives at quadrature points. Discrete functionals are integrated
//! through this map, which keeps every nodal mode visible to the
//! derivative term (spectral nodal differentiation annihilates the
//! Nyquist mode, and centred stencils annihilate the sawtooth).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GridKind<T: Real> {
    Periodic { n: usize },
    Dirichlet { n: usize, a: T, b: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiffOrder {
    Second,
    Fourth,
    Spectral,
}

impl std::str::FromStr for DiffOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(Self::Second),
            "4" => Ok(Self::Fourth),
            "spectral" => Ok(Self::Spectral),
            other => Err(Error::Unsupported(format!("differentiation order '{other}'"))),
        }
    }
}

/// Values and first derivatives of the nodal interpolant at quadrature points.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureMap<T: Real> {
    pub points: DVector<T>,
    pub weights: DVector<T>,
    pub values: DMatrix<T>,
    pub derivs: DMatrix<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid<T: Real> {
    pub kind: GridKind<T>,
    pub order: DiffOrder,
    pub nodes: DVector<T>,
    pub diff1: DMatrix<T>,
    pub diff2: DMatrix<T>,
    pub quad: DVector<T>,
    pub quadrature: QuadratureMap<T>,
}

/// Diagonal inner product `<u, v> = u^T diag(weights) v` on node space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing<T: Real> {
    pub weights: DVector<T>,
}

impl<T: Real> Pairing<T> {
    pub fn new(weights: DVector<T>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > T::zero())) {
            return Err(domain("pairing weights must be positive"));
        }
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn inner(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        u.iter()
            .zip(v.iter())
            .zip(self.weights.iter())
            .fold(T::zero(), |acc, ((a, b), w)| acc + *a * *b * *w)
    }

    pub fn norm(&self, u: &DVector<T>) -> T {
        self.inner(u, u).sqrt()
    }

    pub fn sqrt_weights(&self) -> DVector<T> {
        self.weights.map(|w| w.sqrt())
    }

    /// Block pairing for vector-valued unknowns stored component-major.
    pub fn repeated(&self, copies: usize) -> Self {
        let n = self.dim();
        Self {
            weights: DVector::from_fn(n * copies, |i, _| self.weights[i % n]),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            weights: &self.weights * factor,
        }
    }
}

impl<T: Real> Grid<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, GridKind::Periodic { .. })
    }

    pub fn domain_length(&self) -> T {
        match self.kind {
            GridKind::Periodic { .. } => T::two_pi(),
            GridKind::Dirichlet { a, b, .. } => b - a,
        }
    }

    pub fn unit_pairing(&self) -> Pairing<T> {
        Pairing {
            weights: self.quad.clone(),
        }
    }
}

pub fn build_grid<T: Real>(kind: GridKind<T>, order: DiffOrder) -> Result<Grid<T>> {
    match kind {
        GridKind::Periodic { n } => {
            if n < 8 {
                return Err(domain(format!("periodic grid needs N >= 8, got {n}")));
            }
            Ok(periodic_grid(n, order))
        }
        GridKind::Dirichlet { n, a, b } => {
            if n < 4 {
                return Err(domain(format!("interval grid needs N >= 4, got {n}")));
            }
            if !(b > a) {
                return Err(domain("interval grid needs a < b"));
            }
            if order == DiffOrder::Spectral {
                return Err(Error::Unsupported(
                    "spectral differentiation on an interval grid; use order 4".into(),
                ));
            }
            Ok(interval_grid(n, a, b, order))
        }
    }
}

pub fn pairing_weights<T: Real>(grid: &Grid<T>, density: &DVector<T>) -> Result<Pairing<T>> {
    if density.len() != grid.len() {
        return Err(Error::Shape(format!(
            "density has {} values for {} nodes",
            density.len(),
            grid.len()
        )));
    }
    if density.iter().any(|d| !(*d > T::zero())) {
        return Err(domain("background density must be positive"));
    }
    Pairing::new(grid.quad.component_mul(density))
}

pub fn diff_apply<T: Real>(grid: &Grid<T>, order: usize, field: &DVector<T>) -> Result<DVector<T>> {
    if field.len() != grid.len() {
        return Err(Error::Shape(format!(
            "field has {} values for {} nodes",
            field.len(),
            grid.len()
        )));
    }
    match order {
        1 => Ok(&grid.diff1 * field),
        2 => Ok(&grid.diff2 * field),
        _ => Err(Error::Unsupported(format!("derivative order {order}"))),
    }
}

fn periodic_grid<T: Real>(n: usize, order: DiffOrder) -> Grid<T> {
    let h = T::two_pi() / T::lit(n as f64);
    let nodes = DVector::from_fn(n, |j, _| h * T::lit(j as f64));
    let (diff1, diff2) = match order {
        DiffOrder::Spectral => spectral_periodic(n),
        DiffOrder::Second => periodic_stencil(n, h, &[-0.5, 0.0, 0.5], &[1.0, -2.0, 1.0]),
        DiffOrder::Fourth => periodic_stencil(
            n,
            h,
            &[1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
            &[-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        ),
    };
    let quad = DVector::from_element(n, h);
    let quadrature = match order {
        DiffOrder::Spectral => trig_quadrature(n),
        _ => piecewise_quadrature(&nodes, true, h, order),
    };
    Grid {
        kind: GridKind::Periodic { n },
        order,
        nodes,
        diff1,
        diff2,
        quad,
        quadrature,
    }
}

fn periodic_stencil<T: Real>(n: usize, h: T, d1: &[f64], d2: &[f64]) -> (DMatrix<T>, DMatrix<T>) {
    let half = (d1.len() / 2) as isize;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for (s, (&c1, &c2)) in d1.iter().zip(d2).enumerate() {
            let j = (i as isize + s as isize - half).rem_euclid(n as isize) as usize;
            a[(i, j)] += T::lit(c1) / h;
            b[(i, j)] += T::lit(c2) / (h * h);
        }
    }
    (a, b)
}

/// Trigonometric differentiation matrices on `n` equispaced nodes.
/// `diff1` is assembled from its upper triangle so it is exactly antisymmetric.
fn spectral_periodic<T: Real>(n: usize) -> (DMatrix<T>, DMatrix<T>) {
    let h = T::two_pi() / T::lit(n as f64);
    let half = T::lit(0.5);
    let even = n % 2 == 0;
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    let diag2 = if even {
        -T::pi() * T::pi() / (T::lit(3.0) * h * h) - T::lit(1.0 / 6.0)
    } else {
        -T::pi() * T::pi() / (T::lit(3.0) * h * h) + T::lit(1.0 / 12.0)
    };
    for i in 0..n {
        d2[(i, i)] = diag2;
        for j in (i + 1)..n {
            let k = j - i;
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            let x = T::lit(k as f64) * h * half;
            let (s, c) = (x.sin(), x.cos());
            // entry (i, j) corresponds to offset i - j = -k
            let (v1, v2) = if even {
                (-half * sign * c / s, -half * sign / (s * s))
            } else {
                (-half * sign / s, -half * sign * c / (s * s))
            };
            d1[(i, j)] = v1;
            d1[(j, i)] = -v1;
            d2[(i, j)] = v2;
            d2[(j, i)] = v2;
        }
    }
    (d1, d2)
}

/// Cardinal trigonometric interpolant on `n` nodes and its derivative at
/// offset `x`, where `x = 0` is passed as `None`.
fn cardinal<T: Real>(n: usize, x: Option<T>) -> (T, T) {
    let Some(x) = x else {
        return (T::one(), T::zero());
    };
    let nf = T::lit(n as f64);
    let half = T::lit(0.5);
    let (s, c) = ((x * half).sin(), (x * half).cos());
    let (sn, cn) = ((nf * x * half).sin(), (nf * x * half).cos());
    if n % 2 == 0 {
        let cot = c / s;
        let value = sn * cot / nf;
        let deriv = (nf * half * cn * cot - sn * half / (s * s)) / nf;
        (value, deriv)
    } else {
        let value = sn / (nf * s);
        let deriv = (nf * half * cn * s - half * sn * c) / (nf * s * s);
        (value, deriv)
    }
}

/// Exact trigonometric interpolation to `2n` equispaced points.
fn trig_quadrature<T: Real>(n: usize) -> QuadratureMap<T> {
    let m = 2 * n;
    let hf = T::two_pi() / T::lit(m as f64);
    let mut values = DMatrix::zeros(m, n);
    let mut derivs = DMatrix::zeros(m, n);
    for p in 0..m {
        for j in 0..n {
            // fine point p sits at 2 pi p / m, node j at 2 pi (2j) / m
            let offset = p as isize - 2 * j as isize;
            let x = if offset == 0 {
                None
            } else {
                Some(hf * T::lit(offset as f64))
            };
            let (v, d) = cardinal(n, x);
            values[(p, j)] = v;
            derivs[(p, j)] = d;
        }
    }
    // constants are reproduced exactly
    let nf = T::lit(n as f64);
    for p in 0..m {
        let dv = (values.row(p).sum() - T::one()) / nf;
        let dd = derivs.row(p).sum() / nf;
        for j in 0..n {
            values[(p, j)] -= dv;
            derivs[(p, j)] -= dd;
        }
    }
    QuadratureMap {
        points: DVector::from_fn(m, |p, _| hf * T::lit(p as f64)),
        weights: DVector::from_element(m, hf),
        values,
        derivs,
    }
}

/// Lagrange basis values and derivatives at `x` for the given nodes.
fn lagrange<T: Real>(nodes: &[T], x: T) -> (Vec<T>, Vec<T>) {
    let k = nodes.len();
    let mut val = vec![T::zero(); k];
    let mut der = vec![T::zero(); k];
    for i in 0..k {
        let mut denom = T::one();
        for j in 0..k {
            if j != i {
                denom *= nodes[i] - nodes[j];
            }
        }
        let mut prod = T::one();
        for j in 0..k {
            if j != i {
                prod *= x - nodes[j];
            }
        }
        let mut dsum = T::zero();
        for skip in 0..k {
            if skip == i {
                continue;
            }
            let mut p = T::one();
            for j in 0..k {
                if j != i && j != skip {
                    p *= x - nodes[j];
                }
            }
            dsum += p;
        }
        val[i] = prod / denom;
        der[i] = dsum / denom;
    }
    (val, der)
}

/// Cell-wise quadrature: one midpoint per cell with linear interpolation
/// (order 2) or two Gauss points per cell with cubic interpolation (order 4).
fn piecewise_quadrature<T: Real>(
    nodes: &DVector<T>,
    periodic: bool,
    h: T,
    order: DiffOrder,
) -> QuadratureMap<T> {
    let n = nodes.len();
    let cells = if periodic { n } else { n - 1 };
    let (offsets, stencil, left): (Vec<T>, usize, isize) = match order {
        DiffOrder::Second => (vec![T::lit(0.5)], 2, 0),
        _ => {
            let g = T::lit(0.5 / 3f64.sqrt());
            (vec![T::lit(0.5) - g, T::lit(0.5) + g], 4.min(n), 1)
        }
    };
    let per = offsets.len();
    let m = cells * per;
    let mut values = DMatrix::zeros(m, n);
    let mut derivs = DMatrix::zeros(m, n);
    let mut points = DVector::zeros(m);
    let weights = DVector::from_element(m, h / T::lit(per as f64));
    for cell in 0..cells {
        let mut start = cell as isize - left;
        if !periodic {
            start = start.clamp(0, (n - stencil) as isize);
        }
        let idx: Vec<usize> = (0..stencil)
            .map(|s| (start + s as isize).rem_euclid(n as isize) as usize)
            .collect();
        // local coordinates unwrap periodic indices
        let local: Vec<T> = (0..stencil)
            .map(|s| h * T::lit((start + s as isize - cell as isize) as f64))
            .collect();
        for (q, off) in offsets.iter().enumerate() {
            let row = cell * per + q;
            let x = *off * h;
            points[row] = nodes[cell] + x;
            let (v, d) = lagrange(&local, x);
            for s in 0..stencil {
                values[(row, idx[s])] += v[s];
                derivs[(row, idx[s])] += d[s];
            }
        }
    }
    QuadratureMap {
        points,
        weights,
        values,
        derivs,
    }
}

/// Finite-difference weights (Fornberg) for derivatives 0..=2 at `z`.
fn fornberg<T: Real>(z: T, x: &[T]) -> [Vec<T>; 3] {
    let n = x.len();
    let mut c = vec![vec![T::zero(); 3]; n];
    let mut c1 = T::one();
    let mut c4 = x[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mm = i.min(2);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mm).rev() {
                    c[i][k] = c1 * (T::lit(k as f64) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mm).rev() {
                c[j][k] = (c4 * c[j][k] - T::lit(k as f64) * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    [
        c.iter().map(|r| r[0]).collect(),
        c.iter().map(|r| r[1]).collect(),
        c.iter().map(|r| r[2]).collect(),
    ]
}

fn interval_grid<T: Real>(n: usize, a: T, b: T, order: DiffOrder) -> Grid<T> {
    let h = (b - a) / T::lit((n - 1) as f64);
    let nodes = DVector::from_fn(n, |j, _| a + h * T::lit(j as f64));
    let (w1, w2) = match order {
        DiffOrder::Second => (3, 4),
        _ => (5, 6),
    };
    let stencil_matrix = |width: usize, deriv: usize| {
        let width = width.min(n);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let start = (i as isize - (width / 2) as isize).clamp(0, (n - width) as isize) as usize;
            let xs: Vec<T> = (start..start + width).map(|j| nodes[j]).collect();
            let w = &fornberg(nodes[i], &xs)[deriv];
            for (s, wv) in w.iter().enumerate() {
                d[(i, start + s)] = *wv;
            }
        }
        d
    };
    let diff1 = stencil_matrix(w1, 1);
    let diff2 = stencil_matrix(w2, 2);

    let quad = match order {
        DiffOrder::Second => {
            let mut q = DVector::from_element(n, h);
            q[0] = h * T::lit(0.5);
            q[n - 1] = h * T::lit(0.5);
            q
        }
        _ => fourth_order_weights(n, h),
    };
    let quadrature = piecewise_quadrature(&nodes, false, h, order);
    Grid {
        kind: GridKind::Dirichlet { n, a, b },
        order,
        nodes,
        diff1,
        diff2,
        quad,
        quadrature,
    }
}

/// Positive fourth-order nodal weights: Gregory end corrections for
/// `n >= 6`, Simpson for `n = 5`, Simpson 3/8 for `n = 4`.
fn fourth_order_weights<T: Real>(n: usize, h: T) -> DVector<T> {
    let pattern: Vec<f64> = match n {
        4 => vec![3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
        5 => vec![1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        _ => {
            let mut w = vec![1.0; n];
            for (i, e) in [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0].iter().enumerate() {
                w[i] = *e;
                w[n - 1 - i] = *e;
            }
            w
        }
    };
    DVector::from_fn(n, |i, _| h * T::lit(pattern[i]))
}

/// Trigonometric interpolant of periodic nodal data, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct TrigInterpolant<T: Real> {
    n: usize,
    mean: T,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> TrigInterpolant<T> {
    pub fn new(values: &DVector<T>) -> Self {
        let n = values.len();
        let nf = T::lit(n as f64);
        let h = T::two_pi() / nf;
        let kmax = n / 2;
        let mut cos = vec![T::zero(); kmax + 1];
        let mut sin = vec![T::zero(); kmax + 1];
        let mut mean = T::zero();
        for (j, v) in values.iter().enumerate() {
            mean += *v;
            for k in 1..=kmax {
                let ang = h * T::lit(((j * k) % n) as f64);
                cos[k] += *v * ang.cos();
                sin[k] += *v * ang.sin();
            }
        }
        mean /= nf;
        let two = T::lit(2.0);
        for k in 1..=kmax {
            let scale = if n % 2 == 0 && k == kmax { T::one() / nf } else { two / nf };
            cos[k] *= scale;
            sin[k] *= scale;
        }
        if n % 2 == 0 {
            // sin(n x / 2) vanishes on the nodes and carries no information
            sin[kmax] = T::zero();
        }
        Self { n, mean, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `(value, first derivative)` at `x`.
    pub fn eval(&self, x: T) -> (T, T) {
        let mut v = self.mean;
        let mut d = T::zero();
        for k in 1..self.cos.len() {
            let kf = T::lit(k as f64);
            let (s, c) = ((kf * x).sin(), (kf * x).cos());
            v += self.cos[k] * c + self.sin[k] * s;
            d += kf * (self.sin[k] * c - self.cos[k] * s);
        }
        (v, d)
    }
}
