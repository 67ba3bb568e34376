//! Jacobi polynomials, rising factorials and the harmonic-ensemble dimension count.

use crate::error::{Error, Result};
use crate::spaces::Space;

/// Parameters of `P_L^{(a,b)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiParams {
    pub a: f64,
    pub b: f64,
    pub degree: u32,
}

impl JacobiParams {
    pub fn new(a: f64, b: f64, degree: u32) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::Domain(format!(
                "Jacobi parameters need a, b > -1 (got {a}, {b})"
            )));
        }
        Ok(JacobiParams { a, b, degree })
    }

    /// Evaluate `P_L^{(a,b)}(x)` for `x` in `[-1, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!(
                "Jacobi argument {x} outside [-1, 1]"
            )));
        }
        Ok(jacobi(self.a, self.b, self.degree, x))
    }

    /// `P_L^{(a,b)}(1) = (a+1)_L / L!`.
    pub fn value_at_one(&self) -> f64 {
        (0..self.degree)
            .map(|k| (self.a + 1.0 + k as f64) / (k as f64 + 1.0))
            .product()
    }
}

/// Rising factorial `(a)_L = a (a+1) ... (a+L-1)`.
pub fn pochhammer(a: f64, l: u32) -> f64 {
    (0..l).map(|k| a + k as f64).product()
}

/// Ratio `(x)_L / (y)_L`, accumulated factor by factor.
pub fn pochhammer_ratio(x: f64, y: f64, l: u32) -> f64 {
    (0..l).map(|k| (x + k as f64) / (y + k as f64)).product()
}

/// Forward three-term recurrence in the degree. No domain check.
pub fn jacobi(a: f64, b: f64, degree: u32, x: f64) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    let ab = a + b;
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b) + 0.5 * (ab + 2.0) * x;
    for n in 2..=degree {
        let n = n as f64;
        let c = 2.0 * n + ab;
        let a1 = 2.0 * n * (n + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (a * a - b * b);
        let a3 = (c - 1.0) * c * (c - 2.0);
        let a4 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * c;
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    p
}

/// `pi_L` in floating point, without the integrality check.
pub fn pi_l_real(space: &Space, l: u32) -> f64 {
    let (al, be) = (space.alpha, space.beta);
    (0..l)
        .map(|k| {
            let k = k as f64;
            ((al + be + 2.0 + k) / (be + 1.0 + k)) * ((al + 2.0 + k) / (k + 1.0))
        })
        .product()
}

/// Dimension `pi_L` of the span of eigenspaces up to level `L`, i.e. the
/// number of points of the harmonic ensemble.
pub fn pi_l(space: &Space, l: u32) -> Result<u64> {
    let value = pi_l_real(space, l);
    if !value.is_finite() || value > 9.007_199_254_740_992e15 {
        return Err(Error::Numerical(format!(
            "pi_L for {space} at L={l} is not exactly representable ({value:e})"
        )));
    }
    let rounded = value.round();
    if (value - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::Numerical(format!(
            "pi_L for {space} at L={l} is not an integer ({value})"
        )));
    }
    Ok(rounded as u64)
}
