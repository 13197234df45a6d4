//! Finite-difference reference spectrum for cross-checking energies.
//!
//! `-psi'' + V psi = E psi` is discretized with the three-point Laplacian on
//! a uniform grid over `[-L, L]` with Dirichlet ends and a node at the
//! origin. Eigenvalues come from Sturm bisection, eigenvectors from inverse
//! iteration. Near-degenerate doublets of deep double wells are resolved by
//! a parity-restricted half-line grid.

use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;
use crate::model::{potential_eval, Parity, PotentialCoeffs, QesSolution};
use crate::wavefield;

pub const DEFAULT_STEP: f64 = 0.005;
pub const MIN_INTERIOR_POINTS: usize = 50;
/// Relative width of the energy window used to accept a grid eigenvalue.
pub const MATCH_WINDOW_REL: f64 = 1e-3;
/// Mirror-sum ratio required to call an eigenvector even or odd.
pub const PARITY_RATIO: f64 = 1e3;
/// Eigenvector entries below this fraction of the maximum are ignored when
/// counting sign changes.
pub const NODE_AMPLITUDE_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0 && step > 0.0 && half_width.is_finite() && step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid needs positive L and h, got L = {half_width}, h = {step}"
            )));
        }
        let ratio = half_width / step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "L = {half_width} is not a multiple of h = {step}"
            )));
        }
        let spec = Self { half_width, step };
        if spec.interior_points() < MIN_INTERIOR_POINTS {
            return Err(Error::InvalidInput(format!(
                "grid has {} interior points, need at least {MIN_INTERIOR_POINTS}",
                spec.interior_points()
            )));
        }
        Ok(spec)
    }

    /// Grid wide enough to hold the state, with `L` a whole number.
    pub fn for_solution(sol: &QesSolution, step: f64) -> Result<Self> {
        let width = wavefield::support_half_width(sol).ceil().max(8.0);
        Self::new(width, step)
    }

    pub fn half_intervals(&self) -> usize {
        (self.half_width / self.step).round() as usize
    }

    pub fn interior_points(&self) -> usize {
        (2 * self.half_intervals()).saturating_sub(1)
    }

    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            step: self.step / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityLabel {
    Definite(Parity),
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpectrum {
    pub spec: GridSpec,
    /// Full-line eigenvectors, or the merged even and odd blocks.
    pub method: GridMethod,
    pub eigenvalues: Vec<f64>,
    pub parities: Vec<ParityLabel>,
    pub nodes: Vec<usize>,
}

fn count_sign_changes(psi: &[f64]) -> usize {
    let max = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = 0.0;
    let mut changes = 0;
    for &v in psi {
        if v.abs() < NODE_AMPLITUDE_CUTOFF * max {
            continue;
        }
        let s = v.signum();
        if last != 0.0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}

fn classify_parity(psi: &[f64]) -> ParityLabel {
    let n = psi.len();
    let mut sym = 0.0;
    let mut anti = 0.0;
    for i in 0..n {
        sym += (psi[i] + psi[n - 1 - i]).abs();
        anti += (psi[i] - psi[n - 1 - i]).abs();
    }
    if anti * PARITY_RATIO <= sym {
        ParityLabel::Definite(Parity::Even)
    } else if sym * PARITY_RATIO <= anti {
        ParityLabel::Definite(Parity::Odd)
    } else {
        ParityLabel::Ambiguous
    }
}

fn lowest_eigenvalues(t: &SymTridiagonal, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > t.len() {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenvalues of a {}-point grid",
            t.len()
        )));
    }
    let values: Vec<f64> = (0..k).map(|j| t.eigenvalue(j)).collect();
    let tol = t.bisection_tolerance();
    for w in values.windows(2) {
        if w[1] - w[0] < 10.0 * tol {
            return Err(Error::GridTooCoarse {
                lower: w[0],
                upper: w[1],
            });
        }
    }
    Ok(values)
}

/// Lowest `k` eigenvalues of the full-line grid with parity and node labels.
///
/// Deep double wells have doublets split below the bisection resolution,
/// where full-line eigenvectors mix parities. The grid is then solved in its
/// exact even and odd blocks and the two ladders are merged.
pub fn grid_spectrum(coeffs: &PotentialCoeffs, spec: &GridSpec, k: usize) -> Result<GridSpectrum> {
    match full_line_spectrum(coeffs, spec, k) {
        Ok(s) if s.parities.iter().all(|p| *p != ParityLabel::Ambiguous) => Ok(s),
        Ok(_) | Err(Error::GridTooCoarse { .. }) => parity_block_spectrum(coeffs, spec, k),
        Err(e) => Err(e),
    }
}

fn full_line_spectrum(coeffs: &PotentialCoeffs, spec: &GridSpec, k: usize) -> Result<GridSpectrum> {
    let n_half = spec.half_intervals();
    let h = spec.step;
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = (1..2 * n_half)
        .map(|i| {
            let x = -spec.half_width + i as f64 * h;
            2.0 * inv_h2 + potential_eval(coeffs, x)
        })
        .collect();
    let off = vec![-inv_h2; diag.len() - 1];
    let t = SymTridiagonal::new(diag, off);
    let eigenvalues = lowest_eigenvalues(&t, k)?;
    let mut parities = Vec::with_capacity(k);
    let mut nodes = Vec::with_capacity(k);
    for &e in &eigenvalues {
        let psi = t.eigenvector(e);
        parities.push(classify_parity(&psi));
        nodes.push(count_sign_changes(&psi));
    }
    Ok(GridSpectrum {
        spec: *spec,
        method: GridMethod::FullLine,
        eigenvalues,
        parities,
        nodes,
    })
}

fn parity_block_spectrum(coeffs: &PotentialCoeffs, spec: &GridSpec, k: usize) -> Result<GridSpectrum> {
    if k == 0 || k > spec.interior_points() {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenvalues of a {}-point grid",
            spec.interior_points()
        )));
    }
    let even = half_line_spectrum(coeffs, spec, Parity::Even, k.div_ceil(2))?;
    let odd = half_line_spectrum(coeffs, spec, Parity::Odd, k / 2)?;
    // values this close are not ordered by the arithmetic; the even state
    // lies lower in the exact problem
    let tie = 10.0 * half_line_tolerance(coeffs, spec);
    let (mut i, mut j) = (0, 0);
    let mut out = GridSpectrum {
        spec: *spec,
        method: GridMethod::HalfLine,
        eigenvalues: Vec::with_capacity(k),
        parities: Vec::with_capacity(k),
        nodes: Vec::with_capacity(k),
    };
    while out.eigenvalues.len() < k {
        let take_even = match (even.get(i), odd.get(j)) {
            (Some(e), Some(o)) => e.0 <= o.0 + tie,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let ((e, n), parity) = if take_even {
            i += 1;
            (even[i - 1], Parity::Even)
        } else {
            j += 1;
            (odd[j - 1], Parity::Odd)
        };
        out.eigenvalues.push(e);
        out.parities.push(ParityLabel::Definite(parity));
        out.nodes.push(n);
    }
    Ok(out)
}

fn half_line_tolerance(coeffs: &PotentialCoeffs, spec: &GridSpec) -> f64 {
    let inv_h2 = 1.0 / (spec.step * spec.step);
    let diag: Vec<f64> = (0..spec.half_intervals())
        .map(|i| 2.0 * inv_h2 + potential_eval(coeffs, i as f64 * spec.step))
        .collect();
    let off = vec![-inv_h2; diag.len() - 1];
    SymTridiagonal::new(diag, off).bisection_tolerance()
}

/// Lowest `k` states of one parity from the half-line `[0, L]`: a Neumann
/// condition at the origin for even states, Dirichlet for odd ones.
///
/// Returns `(energy, full-line node count)` pairs.
pub fn half_line_spectrum(
    coeffs: &PotentialCoeffs,
    spec: &GridSpec,
    parity: Parity,
    k: usize,
) -> Result<Vec<(f64, usize)>> {
    let n_half = spec.half_intervals();
    let h = spec.step;
    let inv_h2 = 1.0 / (h * h);
    let first = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let diag: Vec<f64> = (first..n_half)
        .map(|i| 2.0 * inv_h2 + potential_eval(coeffs, i as f64 * h))
        .collect();
    let mut off = vec![-inv_h2; diag.len() - 1];
    if parity == Parity::Even {
        // ghost point psi_{-1} = psi_1, symmetrized by scaling psi_0
        off[0] = -std::f64::consts::SQRT_2 * inv_h2;
    }
    let t = SymTridiagonal::new(diag, off);
    let eigenvalues = lowest_eigenvalues(&t, k)?;
    Ok(eigenvalues
        .into_iter()
        .map(|e| {
            let half_nodes = count_sign_changes(&t.eigenvector(e));
            let nodes = match parity {
                Parity::Even => 2 * half_nodes,
                Parity::Odd => 2 * half_nodes + 1,
            };
            (e, nodes)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMethod {
    FullLine,
    HalfLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub method: GridMethod,
    /// Index of the matched state in the spectrum used.
    pub index: usize,
    /// Grid energy at step `h`.
    pub coarse: f64,
    /// Grid energy at step `h / 2`.
    pub fine: f64,
    /// `(4 E_{h/2} - E_h) / 3`.
    pub extrapolated: f64,
    /// `|E_{h/2} - E|`.
    pub delta_raw: f64,
    /// `|extrapolated - E|`.
    pub delta_extrapolated: f64,
    pub window: f64,
}

impl EnergyReport {
    /// `|E_h - E| / |E_{h/2} - E|`, close to 4 for a second-order scheme.
    pub fn convergence_ratio(&self, energy: f64) -> f64 {
        (self.coarse - energy).abs() / (self.fine - energy).abs()
    }
}

pub fn match_window(energy: f64) -> f64 {
    MATCH_WINDOW_REL * energy.abs().max(1.0)
}

fn full_line_match(
    sol: &QesSolution,
    spec: &GridSpec,
    k: usize,
) -> Option<(usize, f64, f64)> {
    let wanted = ParityLabel::Definite(sol.parity());
    let find = |g: &GridSpectrum| {
        (0..g.eigenvalues.len()).find(|&j| g.parities[j] == wanted && g.nodes[j] == sol.nodes)
    };
    let coarse = grid_spectrum(&sol.coeffs, spec, k).ok()?;
    let fine = grid_spectrum(&sol.coeffs, &spec.refined(), k).ok()?;
    let (ic, jf) = (find(&coarse)?, find(&fine)?);
    if ic != jf {
        return None;
    }
    Some((ic, coarse.eigenvalues[ic], fine.eigenvalues[jf]))
}

fn half_line_match(sol: &QesSolution, spec: &GridSpec, k: usize) -> Result<Option<(usize, f64, f64)>> {
    let find = |s: &[(f64, usize)]| s.iter().position(|&(_, n)| n == sol.nodes);
    let coarse = half_line_spectrum(&sol.coeffs, spec, sol.parity(), k)?;
    let fine = half_line_spectrum(&sol.coeffs, &spec.refined(), sol.parity(), k)?;
    Ok(match (find(&coarse), find(&fine)) {
        (Some(i), Some(j)) if i == j => Some((i, coarse[i].0, fine[j].0)),
        _ => None,
    })
}

/// Checks `sol.energy` against the grid state with the same parity and node
/// count, using steps `h` and `h / 2` and Richardson extrapolation.
///
/// `k` is the number of grid states examined; it is raised to cover the
/// state's node count.
pub fn verify_energy(sol: &QesSolution, spec: &GridSpec, k: usize) -> Result<EnergyReport> {
    let window = match_window(sol.energy);
    let no_match = Error::NoMatch {
        energy: sol.energy,
        parity: sol.parity(),
        nodes: sol.nodes,
        window,
    };
    let within = |e: f64| (e - sol.energy).abs() <= window;

    let full_k = k.max(sol.nodes + 3).min(spec.interior_points());
    let mut candidate = full_line_match(sol, spec, full_k).map(|m| (GridMethod::FullLine, m));
    if !matches!(candidate, Some((_, (_, _, fine))) if within(fine)) {
        let half_k = (sol.nodes / 2 + 2).min(spec.half_intervals().saturating_sub(1)).max(1);
        if let Some(m) = half_line_match(sol, spec, half_k)? {
            candidate = Some((GridMethod::HalfLine, m));
        }
    }
    let Some((method, (index, coarse, fine))) = candidate else {
        return Err(no_match);
    };
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    if !within(fine) {
        return Err(no_match);
    }
    Ok(EnergyReport {
        method,
        index,
        coarse,
        fine,
        extrapolated,
        delta_raw: (fine - sol.energy).abs(),
        delta_extrapolated: (extrapolated - sol.energy).abs(),
        window,
    })
}

/// `max |-psi'' + (V - E) psi| / max |psi|` over the given points, with
/// `psi''` from the analytic form on each half-line.
pub fn residual_check(sol: &QesSolution, xs: &[f64]) -> Result<f64> {
    let mut max_res = 0.0f64;
    let mut max_psi = 0.0f64;
    for &x in xs {
        let psi = wavefield::psi_eval(sol, x);
        let res = -wavefield::psi_second(sol, x) + (potential_eval(&sol.coeffs, x) - sol.energy) * psi;
        if !res.is_finite() {
            return Err(Error::NonFinite(format!("residual at x = {x}")));
        }
        max_res = max_res.max(res.abs());
        max_psi = max_psi.max(psi.abs());
    }
    if max_psi == 0.0 {
        return Err(Error::InvalidInput("wave function vanishes on the residual grid".into()));
    }
    Ok(max_res / max_psi)
}

/// Evenly spaced points on `[-half_width, half_width]`.
pub fn uniform_points(half_width: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
        .collect()
}
