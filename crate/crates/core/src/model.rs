//! Domain types of the symmetrized quartic oscillator
//!
//! ```text
//! V(x) = q x + r x^2 + s x^3 + x^4     (x < 0)
//! V(x) = V(-x)                         (x > 0)
//! ```
//!
//! together with the two-branch exponent `W(x) = x^3/3 + a x^2 + b x` on the
//! left half-line and the four-diagonal coefficient matrix whose eigenvectors
//! carry the polynomial factor of a quasi-exact state.

use std::fmt;

/// Exponent coefficients of the left branch `W(x) = x^3/3 + a x^2 + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentParams {
    pub a: f64,
    pub b: f64,
}

impl ExponentParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Couplings of the left branch `q x + r x^2 + s x^3 + x^4`; `V(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialCoeffs {
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl PotentialCoeffs {
    pub fn new(q: f64, r: f64, s: f64) -> Self {
        Self { q, r, s }
    }

    /// Couplings forced by an exponent and a polynomial degree.
    pub fn from_exponent(params: ExponentParams, degree: usize) -> Self {
        Self {
            q: coupling_q(params.a, params.b, degree),
            r: coupling_r(params.a, params.b),
            s: coupling_s(params.a),
        }
    }

    /// `(A, B, C)` of `A|x| + B x^2 + C |x|^3 + x^4`.
    pub fn abstract_form(&self) -> (f64, f64, f64) {
        (-self.q, self.r, -self.s)
    }

    pub fn from_abstract(a_abs: f64, b_quad: f64, c_cubic: f64) -> Self {
        Self {
            q: -a_abs,
            r: b_quad,
            s: -c_cubic,
        }
    }

    /// Left-branch polynomial, valid for any `x` as a polynomial.
    #[inline]
    pub fn left_branch(&self, x: f64) -> f64 {
        x * (self.q + x * (self.r + x * (self.s + x)))
    }

    #[inline]
    pub fn left_branch_prime(&self, x: f64) -> f64 {
        self.q + x * (2.0 * self.r + x * (3.0 * self.s + 4.0 * x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// `+1` for even states, `-1` for odd states.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Parity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(format!("unknown parity '{other}' (expected even or odd)")),
        }
    }
}

/// Degree, parity and the free family parameter `b` of a requested state.
///
/// `branch` is the ascending index of the eigenvalue of `M(a, b, N)` the
/// state sits on; solvers overwrite it with the label they observe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QesProblem {
    pub degree: usize,
    pub parity: Parity,
    pub b: f64,
    pub branch: usize,
}

impl QesProblem {
    pub fn new(degree: usize, parity: Parity, b: f64) -> Self {
        Self {
            degree,
            parity,
            b,
            branch: 0,
        }
    }

    pub fn with_branch(mut self, branch: usize) -> Self {
        self.branch = branch;
        self
    }
}

/// A fully determined quasi-exact state.
///
/// The wave function on `x <= 0` is `norm * P(x) * exp(W(x) - W_ref)` with
/// `P(x) = sum_k v[k] x^k`; the right half follows from the parity.
#[derive(Debug, Clone, PartialEq)]
pub struct QesSolution {
    pub problem: QesProblem,
    pub params: ExponentParams,
    pub coeffs: PotentialCoeffs,
    /// Auxiliary eigenvalue of `M(a, b, N)`.
    pub p: f64,
    /// Bound-state energy, `-p`.
    pub energy: f64,
    pub v: Vec<f64>,
    pub nodes: usize,
    pub norm: f64,
}

impl QesSolution {
    pub fn degree(&self) -> usize {
        self.problem.degree
    }

    pub fn parity(&self) -> Parity {
        self.problem.parity
    }

    /// `P(x)` of the left branch.
    pub fn poly(&self, x: f64) -> f64 {
        poly_eval(&self.v, x)
    }
}

pub fn coupling_s(a: f64) -> f64 {
    4.0 * a
}

pub fn coupling_r(a: f64, b: f64) -> f64 {
    4.0 * a * a + 2.0 * b
}

pub fn coupling_q(a: f64, b: f64, degree: usize) -> f64 {
    4.0 * a * b + 2.0 * degree as f64 + 2.0
}

/// Symmetrized potential. The right branch is evaluated by reflection so
/// `potential_eval(c, x) == potential_eval(c, -x)` holds bit for bit.
pub fn potential_eval(coeffs: &PotentialCoeffs, x: f64) -> f64 {
    if x < 0.0 {
        coeffs.left_branch(x)
    } else if x > 0.0 {
        coeffs.left_branch(-x)
    } else {
        0.0
    }
}

/// Left-branch exponent as a plain cubic.
#[inline]
pub fn w_left(params: ExponentParams, x: f64) -> f64 {
    x * (params.b + x * (params.a + x / 3.0))
}

/// `W'(x) = x^2 + 2 a x + b` of the left branch.
#[inline]
pub fn w_left_prime(params: ExponentParams, x: f64) -> f64 {
    params.b + x * (2.0 * params.a + x)
}

#[inline]
pub fn w_left_second(params: ExponentParams, x: f64) -> f64 {
    2.0 * x + 2.0 * params.a
}

/// Two-branch exponent, even in `x`.
pub fn w_eval(params: ExponentParams, x: f64) -> f64 {
    if x > 0.0 {
        w_left(params, -x)
    } else {
        w_left(params, x)
    }
}

/// Derivative of [`w_eval`]; returns the left limit at `x = 0`.
pub fn w_prime(params: ExponentParams, x: f64) -> f64 {
    if x > 0.0 {
        -w_left_prime(params, -x)
    } else {
        w_left_prime(params, x)
    }
}

/// Second derivative of [`w_eval`]; returns the left limit at `x = 0`.
pub fn w_second(params: ExponentParams, x: f64) -> f64 {
    if x > 0.0 {
        w_left_second(params, -x)
    } else {
        w_left_second(params, x)
    }
}

pub(crate) fn poly_eval(v: &[f64], x: f64) -> f64 {
    v.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// The four-diagonal `(N+1) x (N+1)` coefficient matrix `M(a, b, N)`.
///
/// Row `k` of `(M - p I) v = 0` is the vanishing of the `x^k` coefficient of
/// `(V - E) psi - psi''` once the three leading couplings are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    /// `M[n][n] = 4 a n + 2 a + b^2`
    pub main: Vec<f64>,
    /// `M[m][m+1] = 2 b (m + 1)`
    pub upper: Vec<f64>,
    /// `M[k][k+2] = (k + 1)(k + 2)`
    pub upper2: Vec<f64>,
    /// `M[m+1][m] = -2 (N - m)`
    pub lower: Vec<f64>,
}

impl BandedMatrix {
    pub fn size(&self) -> usize {
        self.main.len()
    }

    pub fn degree(&self) -> usize {
        self.main.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.size();
        assert!(i < n && j < n, "index ({i}, {j}) outside {n}x{n} matrix");
        if i == j {
            self.main[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if j == i + 2 {
            self.upper2[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    /// Row `k` of `(M - p I) v`; entries of `v` past its end count as zero.
    pub fn shifted_row(&self, k: usize, p: f64, v: &[f64]) -> f64 {
        let at = |i: usize| v.get(i).copied().unwrap_or(0.0);
        let mut acc = (self.main[k] - p) * at(k);
        if k > 0 {
            acc += self.lower[k - 1] * at(k - 1);
        }
        if k < self.upper.len() {
            acc += self.upper[k] * at(k + 1);
        }
        if k < self.upper2.len() {
            acc += self.upper2[k] * at(k + 2);
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size());
        (0..self.size()).map(|k| self.shifted_row(k, 0.0, v)).collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

pub fn build_matrix(params: ExponentParams, degree: usize) -> BandedMatrix {
    let ExponentParams { a, b } = params;
    let n = degree;
    BandedMatrix {
        main: (0..=n).map(|k| 4.0 * a * k as f64 + 2.0 * a + b * b).collect(),
        upper: (0..n).map(|m| 2.0 * b * (m + 1) as f64).collect(),
        upper2: (0..n.saturating_sub(1))
            .map(|k| ((k + 1) * (k + 2)) as f64)
            .collect(),
        lower: (0..n).map(|m| -2.0 * (n - m) as f64).collect(),
    }
}
