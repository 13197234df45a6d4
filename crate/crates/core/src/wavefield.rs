//! Evaluation of the two-branch wave function, its normalization, node
//! counting and tabulation.
//!
//! Every value is computed on the left branch at `t = -|x|` and reflected,
//! with the exponent shifted by its maximum so nothing overflows.

use crate::error::{Error, Result};
use crate::model::{potential_eval, w_left, w_left_prime, w_left_second, ExponentParams, QesSolution};

pub const DEFAULT_NORM_POINTS: usize = 20_001;
pub const DEFAULT_NODE_POINTS: usize = 4_001;
/// Relative size below which `P` counts as zero when counting nodes.
pub const NODE_ZERO_TOL: f64 = 1e-12;
/// Log-amplitude below which the wave function is treated as vanished.
pub const SUPPORT_LOG_CUTOFF: f64 = -60.0;

/// `max_{x <= 0} W(x)`. The cubic tends to `-inf` as `x -> -inf`, so the
/// maximum is at the origin or at a critical point of `W`.
pub fn w_ref(params: ExponentParams) -> f64 {
    let mut best = 0.0f64;
    let disc = params.a * params.a - params.b;
    if disc >= 0.0 {
        let root = disc.sqrt();
        for x in [-params.a - root, -params.a + root] {
            if x <= 0.0 {
                best = best.max(w_left(params, x));
            }
        }
    }
    best
}

fn poly_and_derivs(v: &[f64], x: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut ddp = 0.0;
    for &c in v.iter().rev() {
        ddp = ddp * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp, ddp)
}

fn abs_poly(v: &[f64], x: f64) -> f64 {
    v.iter().rev().fold(0.0, |acc, c| acc * x.abs() + c.abs())
}

struct LeftValues {
    psi: f64,
    psi_prime: f64,
    psi_second: f64,
}

fn left_values(sol: &QesSolution, t: f64, shift: f64) -> LeftValues {
    let (p, dp, ddp) = poly_and_derivs(&sol.v, t);
    let w1 = w_left_prime(sol.params, t);
    let w2 = w_left_second(sol.params, t);
    let e = sol.norm * (w_left(sol.params, t) - shift).exp();
    LeftValues {
        psi: p * e,
        psi_prime: (w1 * p + dp) * e,
        psi_second: ((w1 * w1 + w2) * p + 2.0 * w1 * dp + ddp) * e,
    }
}

/// `psi(x)`. At `x = 0` the left formula is used.
pub fn psi_eval(sol: &QesSolution, x: f64) -> f64 {
    let shift = w_ref(sol.params);
    let vals = left_values(sol, -x.abs(), shift);
    if x > 0.0 {
        sol.parity().sign() * vals.psi
    } else {
        vals.psi
    }
}

/// `psi'(x)`; the left limit at `x = 0`.
pub fn psi_prime(sol: &QesSolution, x: f64) -> f64 {
    let shift = w_ref(sol.params);
    let vals = left_values(sol, -x.abs(), shift);
    if x > 0.0 {
        -sol.parity().sign() * vals.psi_prime
    } else {
        vals.psi_prime
    }
}

/// `psi''(x)` from the analytic derivatives of `P` and `W`.
pub fn psi_second(sol: &QesSolution, x: f64) -> f64 {
    let shift = w_ref(sol.params);
    let vals = left_values(sol, -x.abs(), shift);
    if x > 0.0 {
        sol.parity().sign() * vals.psi_second
    } else {
        vals.psi_second
    }
}

/// Smallest `x >= 8` (in steps of 0.5) beyond which `|psi|` is below
/// `exp(-60)` relative to its scale.
pub fn support_half_width(sol: &QesSolution) -> f64 {
    let shift = w_ref(sol.params);
    let mut x = 8.0;
    while x < 1e3 {
        let log_amp = w_left(sol.params, -x) - shift + abs_poly(&sol.v, x).ln();
        if log_amp <= SUPPORT_LOG_CUTOFF {
            break;
        }
        x += 0.5;
    }
    x
}

/// Normalization constant `c` such that `c^2 * int psi^2 = 1` over
/// `[-half_width, half_width]`, with `psi` taken at unit norm.
///
/// Composite Simpson on each half-line, so the cusp at the origin sits on a
/// panel boundary, combined with the same rule at twice the step to cancel
/// the `h^4` error term.
pub fn normalize(sol: &QesSolution, half_width: f64, points: usize) -> Result<f64> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidInput(format!("half width {half_width} must be positive")));
    }
    let intervals = ((points.max(9) - 1) / 2).div_ceil(4) * 4;
    let h = half_width / intervals as f64;
    let shift = w_ref(sol.params);
    let density: Vec<f64> = (0..=intervals)
        .map(|i| {
            let t = -(i as f64) * h;
            let psi = sol.poly(t) * (w_left(sol.params, t) - shift).exp();
            psi * psi
        })
        .collect();
    let simpson = |stride: usize| {
        let n = intervals / stride;
        let mut sum = density[0] + density[intervals];
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * density[i * stride];
        }
        sum * h * stride as f64 / 3.0
    };
    let fine = simpson(1);
    let coarse = simpson(2);
    let integral = 2.0 * (fine + (fine - coarse) / 15.0);
    if !integral.is_finite() || integral <= 0.0 {
        return Err(Error::NonFinite(format!("norm integral {integral}")));
    }
    Ok(1.0 / integral.sqrt())
}

/// Upper bound on the moduli of the roots of `P`.
fn cauchy_bound(v: &[f64]) -> f64 {
    let lead = v.last().copied().unwrap_or(1.0).abs();
    if lead == 0.0 {
        return f64::INFINITY;
    }
    1.0 + v[..v.len() - 1].iter().fold(0.0f64, |m, c| m.max(c.abs() / lead))
}

/// Number of sign changes of `psi` on a symmetric grid of 4001 points.
pub fn count_nodes(sol: &QesSolution) -> Result<usize> {
    let half_width = 6f64.max(cauchy_bound(&sol.v).min(support_half_width(sol)));
    count_nodes_with(sol, half_width, DEFAULT_NODE_POINTS)
}

/// Sign changes of `psi` on `points` samples of `[-half_width, half_width]`.
///
/// Samples where `|P|` is below `1e-12` of `sum |v_k| |x|^k` are treated as
/// zero; a run of more than three such samples is reported as ambiguous.
pub fn count_nodes_with(sol: &QesSolution, half_width: f64, points: usize) -> Result<usize> {
    if points < 2 || !(half_width > 0.0) {
        return Err(Error::InvalidInput("node grid needs two points and a positive width".into()));
    }
    let parity_sign = sol.parity().sign();
    let mut last_sign = 0.0;
    let mut nodes = 0;
    let mut zero_run = 0;
    for i in 0..points {
        let x = -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64;
        let t = -x.abs();
        let p = sol.poly(t);
        if !p.is_finite() {
            return Err(Error::NonFinite(format!("P({t})")));
        }
        if p.abs() <= NODE_ZERO_TOL * abs_poly(&sol.v, t) {
            zero_run += 1;
            if zero_run > 3 {
                return Err(Error::AmbiguousNode { x });
            }
            continue;
        }
        zero_run = 0;
        let s = if x > 0.0 { parity_sign * p.signum() } else { p.signum() };
        if last_sign != 0.0 && s != last_sign {
            nodes += 1;
        }
        last_sign = s;
    }
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub x: f64,
    pub potential: f64,
    pub psi: f64,
    pub psi_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub rows: Vec<SampleRow>,
}

impl SampleTable {
    pub fn max_abs_psi(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.psi.abs()))
    }
}

/// Tabulates `x, V, psi, psi'` at `count` evenly spaced points.
pub fn sample(sol: &QesSolution, x_min: f64, x_max: f64, count: usize) -> Result<SampleTable> {
    if count < 2 || !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
        return Err(Error::InvalidInput(format!(
            "cannot sample {count} points on [{x_min}, {x_max}]"
        )));
    }
    let rows = (0..count)
        .map(|i| {
            // weighted form keeps symmetric ranges exactly mirrored
            let m = (count - 1) as f64;
            let x = (x_min * (m - i as f64) + x_max * i as f64) / m;
            let row = SampleRow {
                x,
                potential: potential_eval(&sol.coeffs, x),
                psi: psi_eval(sol, x),
                psi_prime: psi_prime(sol, x),
            };
            if row.psi.is_finite() && row.psi_prime.is_finite() {
                Ok(row)
            } else {
                Err(Error::NonFinite(format!("psi at x = {x}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleTable { rows })
}
