//! Exact even-parity states of degree two.
//!
//! With `P(x) = 1 + u x + v x^2` and `u = -b` the coefficient equations
//! reduce to a quadratic in `v` and a quadratic in `a`, leaving `b != 0`
//! as the only free parameter.

use crate::error::{Error, Result};
use crate::model::{ExponentParams, Parity, PotentialCoeffs, QesProblem, QesSolution};
use crate::solve;

/// Which root of a quadratic to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RootSign {
    Plus,
    Minus,
}

impl RootSign {
    fn value(self) -> f64 {
        match self {
            RootSign::Plus => 1.0,
            RootSign::Minus => -1.0,
        }
    }
}

/// Tolerance for the two coefficient equations not used by the eliminations.
pub const CONSISTENCY_TOL: f64 = 1e-10;

pub fn v_discriminant(a: f64, b: f64) -> f64 {
    a * a * b * b - 2.0 * a * b + 1.0 - 2.0 * b * b * b
}

pub fn a_discriminant(b: f64) -> f64 {
    let b3 = b * b * b;
    b3 * b3 - 12.0 * b3 + 16.0
}

/// Roots of `4 b v^2 + 4 (a b - 1) v + 2 b^2 = 0`,
/// `v = (-2ab + 2 +- 2 sqrt(D_v)) / (4b)`.
///
/// The root whose numerator cancels is taken from the product of roots
/// `v+ v- = b / 2`.
pub fn v_pm(a: f64, b: f64, sign: RootSign) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::ZeroB);
    }
    let disc = v_discriminant(a, b);
    if disc < 0.0 {
        return Err(Error::ComplexRoot { discriminant: disc });
    }
    let lin = 2.0 - 2.0 * a * b;
    let root = 2.0 * disc.sqrt();
    let sigma = sign.value();
    // lin + sigma*root cancels when sigma and lin have opposite signs
    let cancels = lin != 0.0 && (sigma > 0.0) != (lin > 0.0);
    if cancels {
        let big = lin - sigma * root;
        if big == 0.0 {
            return Ok(0.0);
        }
        Ok(b / 2.0 / (big / (4.0 * b)))
    } else {
        Ok((lin + sigma * root) / (4.0 * b))
    }
}

/// `a = (-7 b^3 - 8 +- 3 sqrt(b^6 - 12 b^3 + 16)) / (20 b)`.
pub fn a_pm(b: f64, sign: RootSign) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::ZeroB);
    }
    let disc = a_discriminant(b);
    if disc < 0.0 {
        return Err(Error::ComplexRoot { discriminant: disc });
    }
    Ok((-7.0 * b * b * b - 8.0 + sign.value() * 3.0 * disc.sqrt()) / (20.0 * b))
}

/// `E = 2u/v - 10a - b^2` with `u = -b`.
pub fn energy_n2(a: f64, b: f64, v: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::ZeroV);
    }
    Ok(-2.0 * b / v - 10.0 * a - b * b)
}

/// Residual of `4bv - q + 4ab + b^2 u + 2 + 6au - up = 0`, the equation
/// `v_pm` solves, at `u = -b`, `q = 4ab + 6`.
pub fn v_equation_residual(a: f64, b: f64, v: f64, p: f64) -> f64 {
    let u = -b;
    let q = 4.0 * a * b + 6.0;
    4.0 * b * v - q + 4.0 * a * b + b * b * u + 2.0 + 6.0 * a * u - u * p
}

/// Residual of `2a + 2bu + 2v - p + b^2 = 0` at `u = -b`.
pub fn origin_equation_residual(a: f64, b: f64, v: f64, p: f64) -> f64 {
    2.0 * a - 2.0 * b * b + 2.0 * v - p + b * b
}

/// Assembles the even `N = 2` state for one sign pairing and checks that it
/// solves every coefficient equation.
pub fn solution_n2(b: f64, sign_v: RootSign, sign_a: RootSign) -> Result<QesSolution> {
    let a = a_pm(b, sign_a)?;
    let v = v_pm(a, b, sign_v)?;
    let energy = energy_n2(a, b, v)?;
    let p = -energy;

    let scale = 1.0 + p.abs();
    let residual = v_equation_residual(a, b, v, p)
        .abs()
        .max(origin_equation_residual(a, b, v, p).abs());
    if !(residual <= CONSISTENCY_TOL * scale) {
        return Err(Error::InconsistentRoots { residual });
    }

    let params = ExponentParams::new(a, b);
    let problem = QesProblem::new(2, Parity::Even, b);
    solve::assemble(problem, params, p, vec![1.0, -b, v])
}

/// The `v` root that pairs with `a_pm(b, sign_a)`, if any.
pub fn consistent_solution_n2(b: f64, sign_a: RootSign) -> Result<QesSolution> {
    match solution_n2(b, RootSign::Plus, sign_a) {
        Ok(s) => Ok(s),
        Err(Error::InconsistentRoots { .. }) | Err(Error::ComplexRoot { .. }) => {
            solution_n2(b, RootSign::Minus, sign_a)
        }
        Err(e) => Err(e),
    }
}

/// Exact potential of the `b = 1`, `(+, +)` state.
pub fn exact_flagship_coeffs() -> PotentialCoeffs {
    let k = -1.0 + 1.0 / 5f64.sqrt();
    PotentialCoeffs::new(3.0 * (1.0 + 1.0 / 5f64.sqrt()), 2.0 + 9.0 * k * k / 4.0, 3.0 * k)
}
