//! Solving the matching constraints for `(a, p)` at fixed `b`.
//!
//! The coefficient vector is seeded with the matching values at the origin
//! (`v0 = 1, v1 = -b` for even states, `v0 = 0, v1 = 1` for odd ones) and
//! propagated through rows `0..N-2` of `(M - p I) v = 0`. The two remaining
//! rows are the residual pair driven to zero by Newton's method.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hessenberg_eigenvalues, Eigenvalue};
use crate::model::{
    build_matrix, BandedMatrix, ExponentParams, Parity, PotentialCoeffs, QesProblem, QesSolution,
};
use crate::wavefield;

/// Relative size below which the leading coefficient is treated as zero.
pub const DEGENERATE_LEADING_TOL: f64 = 1e-8;
/// Solutions closer than this in both `a` and `p` are the same state.
pub const DEDUP_TOL: f64 = 1e-8;
/// Wider merge radius for solutions that also share their node count. At a
/// double root Newton converges linearly and copies from different seeds
/// scatter by about `sqrt(tol)`; a one-dimensional spectrum has no
/// degeneracy, so equal node counts at nearly equal couplings are one state.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceResult {
    pub v: Vec<f64>,
    /// Row `N - 1` of `(M - p I) v`.
    pub residual_1: f64,
    /// Row `N` of `(M - p I) v`.
    pub residual_2: f64,
}

impl RecurrenceResult {
    pub fn max_residual(&self) -> f64 {
        self.residual_1.abs().max(self.residual_2.abs())
    }

    /// `max_k (1 + |v_k|)`, the scale residuals are measured against.
    pub fn scale(&self) -> f64 {
        self.v.iter().fold(1.0, |m: f64, x| m.max(1.0 + x.abs()))
    }

    pub fn scaled_residual(&self) -> f64 {
        self.max_residual() / self.scale()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    /// Relative finite-difference step, scaled by `1 + |unknown|`.
    pub jacobian_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol_residual: 1e-12,
            tol_step: 1e-12,
            max_iter: 60,
            jacobian_step: 1e-7,
        }
    }
}

/// Whether the first residual depends on `(a, p)` at all. For `N = 0` even
/// and `N = 1` odd states it only involves `b`, so `b` alone decides
/// whether a state exists.
fn residual_1_is_constant(degree: usize, parity: Parity) -> bool {
    matches!((degree, parity), (0, Parity::Even) | (1, Parity::Odd))
}

pub fn propagate_coefficients(
    params: ExponentParams,
    p: f64,
    degree: usize,
    parity: Parity,
) -> Result<RecurrenceResult> {
    let m = build_matrix(params, degree);
    propagate_with(&m, params.b, p, parity)
}

fn propagate_with(m: &BandedMatrix, b: f64, p: f64, parity: Parity) -> Result<RecurrenceResult> {
    let n = m.degree();
    let (v0, v1) = match parity {
        Parity::Even => (1.0, -b),
        Parity::Odd => (0.0, 1.0),
    };
    if n == 0 {
        return match parity {
            // v1 = -b cannot be carried by a constant polynomial
            Parity::Even => Ok(RecurrenceResult {
                v: vec![1.0],
                residual_1: b,
                residual_2: m.main[0] - p,
            }),
            Parity::Odd => Err(Error::InvalidInput(
                "odd states need degree N >= 1".into(),
            )),
        };
    }
    let mut v = vec![0.0; n + 1];
    v[0] = v0;
    v[1] = v1;
    for k in 0..n - 1 {
        // row k with v[k+2] still zero
        let partial = m.shifted_row(k, p, &v);
        v[k + 2] = -partial / m.upper2[k];
    }
    let residual_1 = m.shifted_row(n - 1, p, &v);
    let residual_2 = m.shifted_row(n, p, &v);
    Ok(RecurrenceResult {
        v,
        residual_1,
        residual_2,
    })
}

fn residuals(problem: &QesProblem, a: f64, p: f64) -> Result<RecurrenceResult> {
    propagate_coefficients(ExponentParams::new(a, problem.b), p, problem.degree, problem.parity)
}

fn is_converged(rec: &RecurrenceResult, settings: &NewtonSettings) -> bool {
    rec.max_residual() <= settings.tol_residual * rec.scale()
}

/// Damped two-variable Newton iteration on the terminal residual pair.
///
/// Returns the converged `(a, p)` together with the propagated coefficients.
pub fn newton(
    problem: &QesProblem,
    guess: (f64, f64),
    settings: &NewtonSettings,
) -> Result<(f64, f64, RecurrenceResult)> {
    let (mut a, mut p) = guess;
    if !a.is_finite() || !p.is_finite() || !problem.b.is_finite() {
        return Err(Error::InvalidInput("non-finite guess or b".into()));
    }
    let mut rec = residuals(problem, a, p)?;

    if residual_1_is_constant(problem.degree, problem.parity) {
        if rec.residual_1.abs() > settings.tol_residual * rec.scale() {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual_1: rec.residual_1,
                residual_2: rec.residual_2,
            });
        }
        // the last row is linear in p with slope -v_N
        let lead = *rec.v.last().unwrap();
        p += rec.residual_2 / lead;
        rec = residuals(problem, a, p)?;
        return if is_converged(&rec, settings) {
            Ok((a, p, rec))
        } else {
            Err(Error::NoConvergence {
                iterations: 1,
                residual_1: rec.residual_1,
                residual_2: rec.residual_2,
            })
        };
    }

    for iteration in 0..settings.max_iter {
        if is_converged(&rec, settings) {
            let (a, p, rec) = polish(problem, a, p, rec, settings)?;
            return Ok((a, p, rec));
        }
        let f = [rec.residual_1, rec.residual_2];
        let norm_f = f[0].hypot(f[1]);
        let Some((da, dp)) = newton_direction(problem, a, p, &rec, settings)? else {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual_1: f[0],
                residual_2: f[1],
            });
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let (na, np) = (a + lambda * da, p + lambda * dp);
            let trial = residuals(problem, na, np)?;
            let norm_trial = trial.residual_1.hypot(trial.residual_2);
            if norm_trial.is_finite() && (norm_trial < norm_f || is_converged(&trial, settings)) {
                accepted = Some((na, np, trial));
                break;
            }
            lambda *= 0.5;
        }
        let Some((na, np, trial)) = accepted else {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual_1: f[0],
                residual_2: f[1],
            });
        };
        let step = (na - a).hypot(np - p);
        a = na;
        p = np;
        rec = trial;
        if step <= settings.tol_step * (1.0 + a.hypot(p)) && !is_converged(&rec, settings) {
            // stagnated above the residual tolerance
            return Err(Error::NoConvergence {
                iterations: iteration + 1,
                residual_1: rec.residual_1,
                residual_2: rec.residual_2,
            });
        }
    }
    if is_converged(&rec, settings) {
        return polish(problem, a, p, rec, settings);
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual_1: rec.residual_1,
        residual_2: rec.residual_2,
    })
}

/// Extra undamped steps taken after convergence while `|F|` keeps
/// shrinking. Helps most at double roots, where Newton is only linear.
pub const POLISH_STEPS: usize = 10;

fn polish(
    problem: &QesProblem,
    mut a: f64,
    mut p: f64,
    mut rec: RecurrenceResult,
    settings: &NewtonSettings,
) -> Result<(f64, f64, RecurrenceResult)> {
    for _ in 0..POLISH_STEPS {
        let norm_f = rec.residual_1.hypot(rec.residual_2);
        if norm_f == 0.0 {
            break;
        }
        let Some((da, dp)) = newton_direction(problem, a, p, &rec, settings)? else {
            break;
        };
        let trial = residuals(problem, a + da, p + dp)?;
        if !(trial.residual_1.hypot(trial.residual_2) < norm_f) {
            break;
        }
        a += da;
        p += dp;
        rec = trial;
    }
    Ok((a, p, rec))
}

/// Newton direction from a central-difference Jacobian, `None` when the
/// Jacobian is singular.
fn newton_direction(
    problem: &QesProblem,
    a: f64,
    p: f64,
    rec: &RecurrenceResult,
    settings: &NewtonSettings,
) -> Result<Option<(f64, f64)>> {
    let ha = settings.jacobian_step * (1.0 + a.abs());
    let hp = settings.jacobian_step * (1.0 + p.abs());
    let ra_plus = residuals(problem, a + ha, p)?;
    let ra_minus = residuals(problem, a - ha, p)?;
    let rp_plus = residuals(problem, a, p + hp)?;
    let rp_minus = residuals(problem, a, p - hp)?;
    let j11 = (ra_plus.residual_1 - ra_minus.residual_1) / (2.0 * ha);
    let j21 = (ra_plus.residual_2 - ra_minus.residual_2) / (2.0 * ha);
    let j12 = (rp_plus.residual_1 - rp_minus.residual_1) / (2.0 * hp);
    let j22 = (rp_plus.residual_2 - rp_minus.residual_2) / (2.0 * hp);
    let det = j11 * j22 - j12 * j21;
    if det == 0.0 || !det.is_finite() {
        return Ok(None);
    }
    let (f1, f2) = (rec.residual_1, rec.residual_2);
    Ok(Some((-(j22 * f1 - j12 * f2) / det, -(-j21 * f1 + j11 * f2) / det)))
}

/// Solves for `(a, p)` at the problem's `b` and assembles the state.
pub fn solve_at_b(
    problem: &QesProblem,
    guess: (f64, f64),
    settings: &NewtonSettings,
) -> Result<QesSolution> {
    let (a, p, rec) = newton(problem, guess, settings)?;
    assemble(*problem, ExponentParams::new(a, problem.b), p, rec.v)
}

/// Builds a [`QesSolution`] from converged unknowns: couplings, energy,
/// normalization, node count and the eigenvalue branch label.
pub fn assemble(
    problem: QesProblem,
    params: ExponentParams,
    p: f64,
    v: Vec<f64>,
) -> Result<QesSolution> {
    if v.len() != problem.degree + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} coefficients, got {}",
            problem.degree + 1,
            v.len()
        )));
    }
    let max_coeff = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let leading = *v.last().unwrap();
    if !(leading.abs() > DEGENERATE_LEADING_TOL * max_coeff) {
        return Err(Error::DegenerateLeadingCoefficient { leading, max_coeff });
    }
    let mut solution = QesSolution {
        problem,
        params,
        coeffs: PotentialCoeffs::from_exponent(params, problem.degree),
        p,
        energy: -p,
        v,
        nodes: 0,
        norm: 1.0,
    };
    let half_width = wavefield::support_half_width(&solution);
    solution.norm = wavefield::normalize(&solution, half_width, wavefield::DEFAULT_NORM_POINTS)?;
    solution.nodes = wavefield::count_nodes(&solution)?;
    solution.problem.branch = eigen_crosscheck(&solution)?.branch;
    Ok(solution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCheck {
    /// `min_j |p - p_j|` over all (possibly complex) eigenvalues.
    pub distance: f64,
    /// Index of the nearest eigenvalue in ascending order.
    pub branch: usize,
    pub eigenvalues: Vec<Eigenvalue>,
}

/// Distance from `p` to the spectrum of `M(a, b, N)`, computed by QR on the
/// dense matrix independently of the recurrence.
pub fn eigen_crosscheck(solution: &QesSolution) -> Result<EigenCheck> {
    let m = build_matrix(solution.params, solution.degree());
    let eigenvalues = hessenberg_eigenvalues(m.to_dense())?;
    let (branch, distance) = eigenvalues
        .iter()
        .map(|e| e.distance_to_real(solution.p))
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("matrix has at least one eigenvalue");
    Ok(EigenCheck {
        distance,
        branch,
        eigenvalues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub a_range: (f64, f64),
    pub p_range: (f64, f64),
    /// Points per axis.
    pub grid: usize,
    /// Upper bound on the scaled residual of an accepted local minimum.
    pub threshold: f64,
}

impl ScanSettings {
    pub const DEFAULT_THRESHOLD: f64 = 1.0;

    /// `a` in `[-4, 4]`; `p` bounded by the Gershgorin discs of `M` over
    /// that range.
    pub fn for_problem(problem: &QesProblem) -> Self {
        let a_max: f64 = 4.0;
        let bound = [-a_max, a_max]
            .iter()
            .map(|&a| gershgorin_radius(&build_matrix(ExponentParams::new(a, problem.b), problem.degree)))
            .fold(0.0, f64::max);
        let p_max = bound.ceil().max(5.0);
        Self {
            a_range: (-a_max, a_max),
            p_range: (-p_max, p_max),
            grid: 241,
            threshold: Self::DEFAULT_THRESHOLD,
        }
    }
}

fn gershgorin_radius(m: &BandedMatrix) -> f64 {
    (0..m.size())
        .map(|i| (0..m.size()).map(|j| m.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Coarse grid scan of the scaled residual, returning interior local minima
/// below the threshold as Newton seeds (best first).
pub fn scan_guesses(problem: &QesProblem, settings: &ScanSettings) -> Result<Vec<(f64, f64)>> {
    let g = settings.grid;
    let (a0, a1) = settings.a_range;
    let (p0, p1) = settings.p_range;
    if !(a0.is_finite() && a1.is_finite() && p0.is_finite() && p1.is_finite()) {
        return Err(Error::InvalidInput("scan ranges must be finite".into()));
    }
    if g < 3 {
        return Err(Error::EmptyScan {
            threshold: settings.threshold,
        });
    }
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (g - 1) as f64;
    let values: Vec<Vec<f64>> = (0..g)
        .into_par_iter()
        .map(|i| {
            let a = step(a0, a1, i);
            (0..g)
                .map(|j| {
                    let p = step(p0, p1, j);
                    residuals(problem, a, p)
                        .map(|r| r.scaled_residual())
                        .ok()
                        .filter(|x| x.is_finite())
                        .unwrap_or(f64::INFINITY)
                })
                .collect()
        })
        .collect();

    let mut minima = Vec::new();
    for i in 1..g - 1 {
        for j in 1..g - 1 {
            let c = values[i][j];
            if !(c <= settings.threshold) {
                continue;
            }
            let is_min = (i - 1..=i + 1).all(|ii| {
                (j - 1..=j + 1).all(|jj| (ii == i && jj == j) || c <= values[ii][jj])
            });
            if is_min {
                minima.push((c, step(a0, a1, i), step(p0, p1, j)));
            }
        }
    }
    if minima.is_empty() {
        return Err(Error::EmptyScan {
            threshold: settings.threshold,
        });
    }
    minima.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(minima.into_iter().map(|(_, a, p)| (a, p)).collect())
}

fn same_state(x: &QesSolution, y: &QesSolution) -> bool {
    let close = |tol: f64| {
        (x.params.a - y.params.a).abs() <= tol * (1.0 + x.params.a.abs())
            && (x.p - y.p).abs() <= tol * (1.0 + x.p.abs())
    };
    close(DEDUP_TOL) || (x.nodes == y.nodes && close(CLUSTER_TOL))
}

/// Scan, polish every seed with Newton, and keep the distinct states in
/// ascending order of energy.
pub fn find_solutions(
    problem: &QesProblem,
    scan: &ScanSettings,
    newton_settings: &NewtonSettings,
) -> Result<Vec<QesSolution>> {
    let seeds = scan_guesses(problem, scan)?;
    let found: Vec<QesSolution> = seeds
        .par_iter()
        .filter_map(|&seed| solve_at_b(problem, seed, newton_settings).ok())
        .collect();
    let mut distinct: Vec<QesSolution> = Vec::new();
    for s in found {
        if !distinct.iter().any(|d| same_state(d, &s)) {
            distinct.push(s);
        }
    }
    distinct.sort_by(|x, y| {
        x.energy
            .total_cmp(&y.energy)
            .then(x.params.a.total_cmp(&y.params.a))
    });
    Ok(distinct)
}

/// How to pick one state out of several found at the same `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    LowestEnergy,
    /// Eigenvalue index label; ties go to the smaller `|a|`.
    Branch(usize),
}

impl Selection {
    pub fn pick(self, solutions: Vec<QesSolution>) -> Option<QesSolution> {
        match self {
            Selection::LowestEnergy => solutions.into_iter().next(),
            Selection::Branch(j) => solutions
                .into_iter()
                .filter(|s| s.problem.branch == j)
                .min_by(|x, y| x.params.a.abs().total_cmp(&y.params.a.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepSeed {
    /// Initial `(a, p)` for the first point.
    Guess(f64, f64),
    /// Scan whenever no converged neighbour is available.
    Scan(ScanSettings, Selection),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Converged(QesSolution),
    /// Newton failed from the continuation seed; the branch may have no
    /// real solution at this `b`.
    NoRealSolution(Error),
    /// `b = 0` is not swept.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub b: f64,
    pub status: SweepStatus,
}

impl SweepPoint {
    pub fn solution(&self) -> Option<&QesSolution> {
        match &self.status {
            SweepStatus::Converged(s) => Some(s),
            _ => None,
        }
    }
}

/// Evenly spaced values of `b` from `b_min` to `b_max` inclusive.
pub fn sweep_grid(b_min: f64, b_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidInput("a sweep needs at least two steps".into()));
    }
    if !(b_min.is_finite() && b_max.is_finite()) || b_min > b_max {
        return Err(Error::InvalidInput(format!(
            "invalid sweep range [{b_min}, {b_max}]"
        )));
    }
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                b_max
            } else {
                b_min + (b_max - b_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

/// Sequential continuation in `b`: each converged `(a, p)` seeds the next
/// point, with a secant predictor once two consecutive points converged.
pub fn sweep(
    template: &QesProblem,
    b_min: f64,
    b_max: f64,
    steps: usize,
    seed: SweepSeed,
    settings: &NewtonSettings,
) -> Result<Vec<SweepPoint>> {
    let grid = sweep_grid(b_min, b_max, steps)?;
    let mut out = Vec::with_capacity(grid.len());
    // (b, a, p) of the last two points, cleared on gaps
    let mut history: Vec<(f64, f64, f64)> = Vec::new();

    for b in grid {
        if b == 0.0 {
            out.push(SweepPoint {
                b,
                status: SweepStatus::Skipped,
            });
            history.clear();
            continue;
        }
        let problem = QesProblem { b, ..*template };
        let attempt = match history.as_slice() {
            [.., (b1, a1, p1), (b2, a2, p2)] if *b2 != *b1 => {
                let t = (b - b2) / (b2 - b1);
                let predicted = (a2 + t * (a2 - a1), p2 + t * (p2 - p1));
                solve_at_b(&problem, predicted, settings)
                    .or_else(|_| solve_at_b(&problem, (*a2, *p2), settings))
            }
            [.., (_, a, p)] => solve_at_b(&problem, (*a, *p), settings),
            [] => match seed {
                // reused at every point until something converges
                SweepSeed::Guess(a, p) => solve_at_b(&problem, (a, p), settings),
                SweepSeed::Scan(scan, selection) => find_solutions(&problem, &scan, settings)
                    .and_then(|all| {
                        selection.pick(all).ok_or(Error::NoConvergence {
                            iterations: 0,
                            residual_1: f64::NAN,
                            residual_2: f64::NAN,
                        })
                    }),
            },
        };
        match attempt {
            Ok(s) => {
                history.push((b, s.params.a, s.p));
                if history.len() > 2 {
                    history.remove(0);
                }
                out.push(SweepPoint {
                    b,
                    status: SweepStatus::Converged(s),
                });
            }
            Err(e) => {
                // keep the last converged point as the seed across a gap
                if let Some(last) = history.last().copied() {
                    history.clear();
                    history.push(last);
                }
                out.push(SweepPoint {
                    b,
                    status: SweepStatus::NoRealSolution(e),
                });
            }
        }
    }
    Ok(out)
}
