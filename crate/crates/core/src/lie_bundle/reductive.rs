//! Reductive pairs `g = k + m` and the contracted bracket
//! `[v, w]_lambda = lambda [v, w]` on `m x m`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::algebra::{antisym_unit, commutator, stack_columns, AlgebraElement};
use crate::error::{domain, Result};
use crate::linalg::{orthonormal_span, vectorize};
use crate::scalar::Real;

/// Projection residual above which a matrix is treated as outside a subspace.
pub const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairElement<T: Real> {
    pub k: DMatrix<T>,
    pub m: DMatrix<T>,
}

impl<T: Real> PairElement<T> {
    pub fn new(k: DMatrix<T>, m: DMatrix<T>) -> Self {
        Self { k, m }
    }

    pub fn total(&self) -> DMatrix<T> {
        &self.k + &self.m
    }

    pub fn neg(&self) -> Self {
        Self {
            k: -&self.k,
            m: -&self.m,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            k: &self.k + &other.k,
            m: &self.m + &other.m,
        }
    }

    pub fn norm(&self) -> T {
        (self.k.norm_squared() + self.m.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Subspace<T: Real> {
    /// Orthonormal basis of the flattened span.
    q: DMatrix<T>,
    shape: (usize, usize),
}

impl<T: Real> Subspace<T> {
    fn new(mats: &[DMatrix<T>]) -> Self {
        let shape = mats[0].shape();
        Self {
            q: orthonormal_span(&stack_columns(mats), T::lit(1e-12)),
            shape,
        }
    }

    /// Orthogonal projection and its residual norm.
    fn project(&self, x: &DMatrix<T>) -> (DMatrix<T>, T) {
        let v = vectorize(x);
        let p = &self.q * (self.q.transpose() * &v);
        let res = (&v - &p).norm();
        (DMatrix::from_column_slice(self.shape.0, self.shape.1, p.as_slice()), res)
    }
}

/// Matrix realization of a reductive decomposition with
/// `[k,k] ⊆ k`, `[k,m] ⊆ m`, `[m,m] ⊆ k`.
#[derive(Debug, Clone)]
pub struct ReductivePair<T: Real> {
    k: Subspace<T>,
    m: Subspace<T>,
    pub k_basis: Vec<DMatrix<T>>,
    pub m_basis: Vec<DMatrix<T>>,
}

impl<T: Real> ReductivePair<T> {
    pub fn new(k_basis: Vec<DMatrix<T>>, m_basis: Vec<DMatrix<T>>) -> Result<Self> {
        if k_basis.is_empty() || m_basis.is_empty() {
            return Err(domain("both parts of the pair need a basis"));
        }
        let pair = Self {
            k: Subspace::new(&k_basis),
            m: Subspace::new(&m_basis),
            k_basis,
            m_basis,
        };
        let tol = T::lit(SPAN_TOL);
        let check = |a: &[DMatrix<T>], b: &[DMatrix<T>], target: &Subspace<T>, what: &str| {
            for x in a {
                for y in b {
                    if target.project(&commutator(x, y)).1 > tol {
                        return Err(domain(format!("bracket relation {what} fails")));
                    }
                }
            }
            Ok(())
        };
        check(&pair.k_basis, &pair.k_basis, &pair.k, "[k,k] ⊆ k")?;
        check(&pair.k_basis, &pair.m_basis, &pair.m, "[k,m] ⊆ m")?;
        check(&pair.m_basis, &pair.m_basis, &pair.k, "[m,m] ⊆ k")?;
        Ok(pair)
    }

    /// `k = so(n)` and `m = R^n` inside `so(n+1)`.
    pub fn rotations(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(domain("need n >= 2"));
        }
        let mut k = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                k.push(AlgebraElement::<T>::new(T::one(), antisym_unit(n, a, b), nalgebra::DVector::zeros(n))?.mat);
            }
        }
        let m = (0..n)
            .map(|i| AlgebraElement::<T>::translation(T::one(), n, i).mat)
            .collect();
        Self::new(k, m)
    }

    fn validate(&self, x: &PairElement<T>) -> Result<()> {
        let tol = T::lit(SPAN_TOL);
        let rk = self.k.project(&x.k).1;
        let rm = self.m.project(&x.m).1;
        if rk > tol || rm > tol {
            return Err(domain(format!(
                "element leaves the k+m span (residuals {:e}, {:e})",
                rk.to_f64_lossy(),
                rm.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// The contracted bracket: unchanged on `k x k` and `k x m`, scaled by
    /// `lambda` on `m x m`.
    pub fn deformed_bracket(
        &self,
        lambda: T,
        x: &PairElement<T>,
        y: &PairElement<T>,
    ) -> Result<PairElement<T>> {
        self.validate(x)?;
        self.validate(y)?;
        let kk = commutator(&x.k, &y.k);
        let mm = commutator(&x.m, &y.m) * lambda;
        let km = commutator(&x.k, &y.m) + commutator(&x.m, &y.k);
        let (zk, _) = self.k.project(&(kk + mm));
        let (zm, _) = self.m.project(&km);
        Ok(PairElement { k: zk, m: zm })
    }

    /// The undeformed matrix bracket split into components.
    pub fn bracket(&self, x: &PairElement<T>, y: &PairElement<T>) -> Result<PairElement<T>> {
        self.validate(x)?;
        self.validate(y)?;
        let z = commutator(&x.total(), &y.total());
        Ok(PairElement {
            k: self.k.project(&z).0,
            m: self.m.project(&z).0,
        })
    }

    /// Norm of the cyclic sum `[x,[y,z]] + [y,[z,x]] + [z,[x,y]]` for the
    /// deformed bracket.
    pub fn jacobi_residual(
        &self,
        lambda: T,
        x: &PairElement<T>,
        y: &PairElement<T>,
        z: &PairElement<T>,
    ) -> Result<T> {
        let a = self.deformed_bracket(lambda, x, &self.deformed_bracket(lambda, y, z)?)?;
        let b = self.deformed_bracket(lambda, y, &self.deformed_bracket(lambda, z, x)?)?;
        let c = self.deformed_bracket(lambda, z, &self.deformed_bracket(lambda, x, y)?)?;
        Ok(a.add(&b).add(&c).norm())
    }

    /// Random element with the given coefficient generator.
    pub fn combine(&self, kc: &[T], mc: &[T]) -> PairElement<T> {
        let (r, c) = self.k.shape;
        let mut k = DMatrix::zeros(r, c);
        for (b, &s) in self.k_basis.iter().zip(kc) {
            k += b * s;
        }
        let mut m = DMatrix::zeros(r, c);
        for (b, &s) in self.m_basis.iter().zip(mc) {
            m += b * s;
        }
        PairElement { k, m }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pair: &ReductivePair<f64>, seed: f64) -> PairElement<f64> {
        let kc: Vec<f64> = (0..pair.k_basis.len()).map(|i| (seed * (i as f64 + 1.3)).sin()).collect();
        let mc: Vec<f64> = (0..pair.m_basis.len()).map(|i| (seed * (i as f64 + 2.1)).cos()).collect();
        pair.combine(&kc, &mc)
    }

    #[test]
    fn lambda_one_is_undeformed() {
        let pair = ReductivePair::<f64>::rotations(3).unwrap();
        let x = sample(&pair, 0.7);
        let y = sample(&pair, 1.9);
        let d = pair.deformed_bracket(1.0, &x, &y).unwrap();
        let u = pair.bracket(&x, &y).unwrap();
        assert!(d.add(&u.neg()).norm() < 1e-14);
    }

    #[test]
    fn flat_translations_commute() {
        let pair = ReductivePair::<f64>::rotations(2).unwrap();
        let x = pair.combine(&[0.0], &[0.4, -1.2]);
        let y = pair.combine(&[0.0], &[2.0, 0.5]);
        let z = pair.deformed_bracket(0.0, &x, &y).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn antisymmetric_and_jacobi() {
        let pair = ReductivePair::<f64>::rotations(3).unwrap();
        let (x, y, z) = (sample(&pair, 0.3), sample(&pair, 1.1), sample(&pair, 2.6));
        for lambda in [-1.0, 0.0, 0.5] {
            let a = pair.deformed_bracket(lambda, &x, &y).unwrap();
            let b = pair.deformed_bracket(lambda, &y, &x).unwrap();
            assert_eq!(a, b.neg());
            assert!(pair.jacobi_residual(lambda, &x, &y, &z).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rejects_elements_outside_span() {
        let pair = ReductivePair::<f64>::rotations(2).unwrap();
        let mut bad = sample(&pair, 0.4);
        bad.k[(0, 0)] = 1.0;
        let ok = sample(&pair, 0.9);
        assert!(pair.deformed_bracket(1.0, &bad, &ok).is_err());
    }

    #[test]
    fn rejects_non_reductive_split() {
        // m spanned by a single rotation is not invariant under k.
        let k = vec![antisym_unit::<f64>(3, 0, 1)];
        let m = vec![antisym_unit::<f64>(3, 0, 2)];
        assert!(ReductivePair::new(k, m).is_err());
    }
}
