#![allow(dead_code)]

use std::f64::consts::PI;

use malachite_base::num::conversion::traits::RoundingFrom;
use malachite_base::rounding_modes::RoundingMode;
use num_complex::Complex64;

use factorlab_core::cyclofield::{CycNum, Rational};
use factorlab_core::liealg::{LieElem, SlN};

pub fn rat_f64(q: &Rational) -> f64 {
    f64::rounding_from(q, RoundingMode::Nearest).0
}

/// Complex value of `x` with `ε = exp(2πi/N)`.
pub fn to_complex(x: &CycNum) -> Complex64 {
    let n = x.field().order() as f64;
    x.basis_coeffs()
        .iter()
        .enumerate()
        .map(|(j, c)| Complex64::from_polar(rat_f64(c), 2.0 * PI * j as f64 / n))
        .sum()
}

pub fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

/// Complex `N × N` matrix of a Lie element.
pub fn lie_complex(sl: &SlN, x: &LieElem) -> Vec<Vec<Complex64>> {
    let m = sl.to_matrix(x);
    (0..sl.n()).map(|i| (0..sl.n()).map(|j| to_complex(&m[(i, j)])).collect()).collect()
}
