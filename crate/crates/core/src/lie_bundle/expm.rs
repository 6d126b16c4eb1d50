//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use nalgebra::DMatrix;

use crate::scalar::Real;

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the [13/13] approximant is accurate to unit round-off.
const THETA13: f64 = 5.371_920_351_148_152;

fn one_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, x| acc + x.abs()))
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

/// `exp(a)` for a square matrix.
///
/// # Panics
/// Panics if `a` is not square or contains non-finite entries.
pub fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a).to_f64_lossy();
    assert!(norm.is_finite(), "expm of non-finite matrix");

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = if squarings > 0 {
        a * T::lit(0.5f64.powi(squarings))
    } else {
        a.clone()
    };

    let b: Vec<T> = PADE13.iter().map(|&x| T::lit(x)).collect();
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
