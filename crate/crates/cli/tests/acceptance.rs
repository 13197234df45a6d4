//! Acceptance criteria, run in sequence so that the wall-clock limits are
//! measured without competing tests. Each criterion prints one line.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use qes_core::closed_form::{self, RootSign};
use qes_core::model::potential_eval;
use qes_core::oracle::{self, GridMethod, GridSpec, GridSpectrum, ParityLabel};
use qes_core::solve::{self, NewtonSettings, ScanSettings};
use qes_core::{wavefield, Parity, QesProblem, QesSolution};

const ROUNDED_TOL: f64 = 5e-5;
const EXACT_TOL: f64 = 1e-12;
const EQUIVALENCE_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;
const PERTURBATION: f64 = 1e-3;
const SENSITIVITY_FLOOR: f64 = 1e-4;
const COUPLING_REL_TOL: f64 = 1e-14;
const EIGEN_GAP_REL_TOL: f64 = 1e-9;
const ORACLE_L: f64 = 8.0;
const ORACLE_H: f64 = 0.005;
const ORACLE_K: usize = 8;
const RESIDUAL_POINTS: usize = 200;
const RESIDUAL_HALF_WIDTH: f64 = 6.0;

const LIMIT_REPRODUCE: Duration = Duration::from_secs(1);
const LIMIT_EQUIVALENCE: Duration = Duration::from_secs(5);
const LIMIT_ORACLE: Duration = Duration::from_secs(30);
const LIMIT_GENERAL_N: Duration = Duration::from_secs(120);

struct Outcome {
    failures: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn report(id: usize, name: &str, start: Instant, limit: Option<Duration>, mut outcome: Outcome) -> bool {
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        outcome.check(elapsed < limit, || format!("runtime {elapsed:.2?} exceeds {limit:.0?}"));
    }
    let pass = outcome.failures.is_empty();
    let mut line = format!(
        "criterion {id} {:<34} {} ({elapsed:.2?}) {}",
        name,
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    for f in &outcome.failures {
        line.push_str(&format!("\n    {f}"));
    }
    // written past the harness capture so the lines land in the test log
    let _ = writeln!(std::io::stderr(), "{line}");
    pass
}

fn residual_points() -> Vec<f64> {
    oracle::uniform_points(RESIDUAL_HALF_WIDTH, RESIDUAL_POINTS)
}

fn criterion_reproduce() -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let out = Command::new(env!("CARGO_BIN_EXE_qes"))
        .args(["reproduce", "--json"])
        .output()
        .expect("binary runs");
    o.check(out.status.code() == Some(0), || format!("exit status {:?}", out.status.code()));
    let elapsed = start.elapsed();

    match serde_json::from_slice::<serde_json::Value>(&out.stdout) {
        Ok(report) => {
            let checks = report["checks"].as_array().cloned().unwrap_or_default();
            o.check(!checks.is_empty(), || "no checks reported".into());
            for c in &checks {
                o.check(c["pass"] == true, || format!("{} failed: {}", c["quantity"], c["computed"]));
            }
        }
        Err(e) => o.failures.push(format!("unreadable report: {e}")),
    }

    // independent of the binary: the published and exact couplings
    match closed_form::solution_n2(1.0, RootSign::Plus, RootSign::Plus) {
        Ok(sol) => {
            let c = sol.coeffs;
            let exact = closed_form::exact_flagship_coeffs();
            let k = -1.0 + 1.0 / 5f64.sqrt();
            let rows = [
                ("q", c.q, 4.3416, 3.0 * (1.0 + 1.0 / 5f64.sqrt())),
                ("r", c.r, 2.6875, 2.0 + 9.0 * k * k / 4.0),
                ("s", c.s, -1.6584, 3.0 * k),
            ];
            for (name, got, rounded, exact_value) in rows {
                o.check((got - rounded).abs() <= ROUNDED_TOL, || format!("{name} = {got} vs {rounded}"));
                o.check((got - exact_value).abs() <= EXACT_TOL, || format!("{name} = {got} vs exact {exact_value}"));
            }
            let helper = [exact.q, exact.r, exact.s];
            o.check(helper.iter().zip(&rows).all(|(h, row)| (h - row.3).abs() <= EXACT_TOL), || {
                format!("exact coupling helper gives {helper:?}")
            });
        }
        Err(e) => o.failures.push(format!("closed form failed: {e}")),
    }
    o.detail = format!("binary took {elapsed:.2?}");
    let elapsed_ok = elapsed < LIMIT_REPRODUCE;
    o.check(elapsed_ok, || format!("binary runtime {elapsed:.2?}"));
    report(1, "published values", start, None, o)
}

/// 20 evenly spaced `b` in `[0.3, 1.15]`; `D_a(b) = b^6 - 12 b^3 + 16` is
/// negative on roughly `(1.152, 2.187)`, so the upper part of `[0.3, 1.4]`
/// has no real state.
fn equivalence_b_values() -> Vec<f64> {
    (0..20).map(|i| 0.3 + 0.85 * i as f64 / 19.0).collect()
}

fn max_diff(x: &QesSolution, y: &QesSolution) -> f64 {
    let mut d = (x.params.a - y.params.a).abs().max((x.p - y.p).abs());
    for (u, w) in x.v.iter().zip(&y.v) {
        d = d.max((u - w).abs());
    }
    d
}

fn criterion_equivalence(emitted: &mut Vec<QesSolution>) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let settings = NewtonSettings::default();
    let mut worst = 0.0f64;
    let bs = equivalence_b_values();
    for &b in &bs {
        o.check(closed_form::a_discriminant(b) >= 0.0, || format!("b = {b} has no real a"));
        let problem = QesProblem::new(2, Parity::Even, b);
        let seeds = match solve::scan_guesses(&problem, &ScanSettings::for_problem(&problem)) {
            Ok(s) => s,
            Err(e) => {
                o.failures.push(format!("b = {b}: scan failed: {e}"));
                continue;
            }
        };
        let numeric: Vec<QesSolution> = seeds
            .iter()
            .filter_map(|&seed| solve::solve_at_b(&problem, seed, &settings).ok())
            .collect();
        for sign in [RootSign::Plus, RootSign::Minus] {
            let exact = match closed_form::consistent_solution_n2(b, sign) {
                Ok(s) => s,
                Err(e) if sign == RootSign::Minus => {
                    o.detail = format!("a- unavailable at some b ({e})");
                    continue;
                }
                Err(e) => {
                    o.failures.push(format!("b = {b}: closed form failed: {e}"));
                    continue;
                }
            };
            let best = numeric.iter().map(|s| max_diff(s, &exact)).fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
            o.check(best <= EQUIVALENCE_TOL, || format!("b = {b}, {sign:?}: max |diff| = {best:e}"));
            emitted.push(exact);
        }
    }
    o.detail = format!("{} values of b, worst |diff| = {worst:.2e} {}", bs.len(), o.detail).trim_end().to_string();
    report(2, "closed form vs general solver", start, Some(LIMIT_EQUIVALENCE), o)
}

fn oracle_check(sol: &QesSolution, spec: &GridSpec, o: &mut Outcome) -> f64 {
    match oracle::verify_energy(sol, spec, ORACLE_K) {
        Ok(r) => {
            o.check(r.delta_extrapolated <= ORACLE_TOL, || {
                format!("N = {}, b = {}, E = {}: extrapolated |dE| = {:e}", sol.degree(), sol.params.b, sol.energy, r.delta_extrapolated)
            });
            r.delta_extrapolated
        }
        Err(e) => {
            o.failures.push(format!("N = {}, b = {}, E = {}: {e}", sol.degree(), sol.params.b, sol.energy));
            f64::INFINITY
        }
    }
}

fn criterion_oracle(emitted: &mut Vec<QesSolution>) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let spec = GridSpec::new(ORACLE_L, ORACLE_H).expect("valid grid");
    let mut parts = Vec::new();
    for (b, nodes) in [(1.0, 0usize), (-1.0, 2usize)] {
        match closed_form::solution_n2(b, RootSign::Plus, RootSign::Plus) {
            Ok(sol) => {
                o.check(sol.nodes == nodes, || format!("b = {b}: {} nodes, expected {nodes}", sol.nodes));
                let d = oracle_check(&sol, &spec, &mut o);
                parts.push(format!("b = {b}: |dE| = {d:.1e}"));
                emitted.push(sol);
            }
            Err(e) => o.failures.push(format!("b = {b}: {e}")),
        }
    }
    o.detail = parts.join(", ");
    report(3, "grid oracle", start, Some(LIMIT_ORACLE), o)
}

fn criterion_residual(emitted: &[QesSolution]) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let xs = residual_points();
    o.check(xs.iter().all(|&x| x != 0.0), || "residual grid contains the origin".into());
    let mut worst = 0.0f64;
    for sol in emitted {
        match oracle::residual_check(sol, &xs) {
            Ok(r) => {
                worst = worst.max(r);
                o.check(r <= RESIDUAL_TOL, || format!("N = {}, b = {}, E = {}: residual {r:e}", sol.degree(), sol.params.b, sol.energy));
            }
            Err(e) => o.failures.push(format!("N = {}, b = {}: {e}", sol.degree(), sol.params.b)),
        }
    }
    let mut perturbed = closed_form::solution_n2(1.0, RootSign::Plus, RootSign::Plus).expect("flagship");
    perturbed.v[2] += PERTURBATION;
    let sensitivity = oracle::residual_check(&perturbed, &xs).unwrap_or(0.0);
    o.check(sensitivity > SENSITIVITY_FLOOR, || format!("perturbed residual only {sensitivity:e}"));
    o.detail = format!("{} states, worst {worst:.1e}, perturbed {sensitivity:.1e}", emitted.len());
    report(4, "analytic residual", start, None, o)
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

fn structural_checks(sol: &QesSolution, o: &mut Outcome) {
    let (a, b, n) = (sol.params.a, sol.params.b, sol.degree() as f64);
    let tag = format!("N = {}, {}, b = {b}, E = {}", sol.degree(), sol.parity(), sol.energy);
    let c = sol.coeffs;
    o.check(rel(c.s, 4.0 * a) <= COUPLING_REL_TOL, || format!("{tag}: s = {} vs 4a", c.s));
    o.check(rel(c.r, 4.0 * a * a + 2.0 * b) <= COUPLING_REL_TOL, || format!("{tag}: r = {}", c.r));
    o.check(rel(c.q, 4.0 * a * b + 2.0 * n + 2.0) <= COUPLING_REL_TOL, || format!("{tag}: q = {}", c.q));

    for i in 1..=120 {
        let x = i as f64 * 0.05;
        o.check(potential_eval(&c, x).to_bits() == potential_eval(&c, -x).to_bits(), || format!("{tag}: V not mirrored at {x}"));
        let (left, right) = (wavefield::psi_eval(sol, -x), wavefield::psi_eval(sol, x));
        let mirrored = match sol.parity() {
            Parity::Even => right.to_bits() == left.to_bits(),
            Parity::Odd => right.to_bits() == (-left).to_bits(),
        };
        o.check(mirrored, || format!("{tag}: psi not mirrored at {x}"));
    }

    let matching = match sol.parity() {
        Parity::Even => sol.v[1] + b * sol.v[0] == 0.0,
        Parity::Odd => sol.v[0] == 0.0,
    };
    o.check(matching, || format!("{tag}: matching condition fails, v = {:?}", sol.v));

    match solve::eigen_crosscheck(sol) {
        Ok(e) => o.check(e.distance <= EIGEN_GAP_REL_TOL * (1.0 + sol.p.abs()), || format!("{tag}: eigen gap {:e}", e.distance)),
        Err(e) => o.failures.push(format!("{tag}: {e}")),
    }
}

fn spectrum_checks(spectrum: &GridSpectrum, label: &str, o: &mut Outcome) {
    for (j, (&nodes, &parity)) in spectrum.nodes.iter().zip(&spectrum.parities).enumerate() {
        o.check(nodes == j, || format!("{label}: level {j} has {nodes} nodes"));
        let expected = if j % 2 == 0 { Parity::Even } else { Parity::Odd };
        o.check(parity == ParityLabel::Definite(expected), || format!("{label}: level {j} labelled {parity:?}"));
    }
    if spectrum.method == GridMethod::FullLine {
        o.check(spectrum.eigenvalues.windows(2).all(|w| w[0] < w[1]), || format!("{label}: levels not increasing"));
    }
}

fn criterion_structure(emitted: &[QesSolution]) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let mut spectra = 0;
    for sol in emitted {
        structural_checks(sol, &mut o);
        let spec = GridSpec::for_solution(sol, ORACLE_H).expect("valid grid");
        let label = format!("grid for N = {}, b = {}, E = {}", sol.degree(), sol.params.b, sol.energy);
        match oracle::grid_spectrum(&sol.coeffs, &spec, ORACLE_K) {
            Ok(s) => {
                spectrum_checks(&s, &label, &mut o);
                spectra += 1;
            }
            Err(e) => o.failures.push(format!("{label}: {e}")),
        }
    }
    o.detail = format!("{} states, {spectra} spectra", emitted.len());
    report(5, "structural properties", start, None, o)
}

fn criterion_general_n(emitted: &mut Vec<QesSolution>) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    let settings = NewtonSettings::default();
    let mut found_total = 0;
    let mut worst_oracle = 0.0f64;
    let mut found_states = Vec::new();
    for degree in [3usize, 4] {
        for parity in [Parity::Even, Parity::Odd] {
            let mut family = 0;
            for b in [1.0, -1.0, 0.5, -0.5] {
                let problem = QesProblem::new(degree, parity, b);
                let found = solve::find_solutions(&problem, &ScanSettings::for_problem(&problem), &settings).unwrap_or_default();
                for sol in found {
                    let spec = GridSpec::for_solution(&sol, ORACLE_H).expect("valid grid");
                    worst_oracle = worst_oracle.max(oracle_check(&sol, &spec, &mut o));
                    family += 1;
                    found_states.push(sol);
                }
            }
            o.check(family > 0, || format!("N = {degree}, {parity}: no solution for any b"));
            found_total += family;
        }
    }
    // criteria 4 and 5 on exactly these states
    let mut sub = Outcome::new();
    let xs = residual_points();
    for sol in &found_states {
        match oracle::residual_check(sol, &xs) {
            Ok(r) => sub.check(r <= RESIDUAL_TOL, || format!("N = {}, b = {}: residual {r:e}", sol.degree(), sol.params.b)),
            Err(e) => sub.failures.push(e.to_string()),
        }
        structural_checks(sol, &mut sub);
        if let Ok(spec) = GridSpec::for_solution(sol, ORACLE_H) {
            match oracle::grid_spectrum(&sol.coeffs, &spec, ORACLE_K) {
                Ok(s) => spectrum_checks(&s, &format!("grid for N = {}, b = {}", sol.degree(), sol.params.b), &mut sub),
                Err(e) => sub.failures.push(e.to_string()),
            }
        }
    }
    o.failures.extend(sub.failures);
    emitted.extend(found_states);
    o.detail = format!("{found_total} states, worst oracle |dE| = {worst_oracle:.1e}");
    report(6, "general N", start, Some(LIMIT_GENERAL_N), o)
}

#[test]
fn acceptance_suite() {
    let _ = writeln!(std::io::stderr());
    let mut emitted = Vec::new();
    let results = [
        criterion_reproduce(),
        criterion_equivalence(&mut emitted),
        criterion_oracle(&mut emitted),
        // 6 runs before 4 and 5 so that they cover its states as well
        criterion_general_n(&mut emitted),
    ];
    let residual = criterion_residual(&emitted);
    let structure = criterion_structure(&emitted);
    let all = results.iter().all(|&r| r) && residual && structure;
    assert!(all, "acceptance criteria failed; see the lines above");
}
