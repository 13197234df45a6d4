//! Regression table for the published numbers of the even `N = 2` family.

use qes_core::closed_form::{self, RootSign};
use qes_core::solve::{self, NewtonSettings, ScanSettings, Selection};
use qes_core::{Parity, QesProblem, QesSolution};
use serde::Serialize;

/// Four-decimal published couplings.
pub const ROUNDED_TOL: f64 = 5e-5;
/// Exact closed forms.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub quantity: String,
    pub reference: f64,
    pub computed: f64,
    pub diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(quantity: &str, reference: f64, computed: f64, tolerance: f64) -> Self {
        let diff = (computed - reference).abs();
        Self {
            quantity: quantity.to_string(),
            reference,
            computed,
            diff,
            tolerance,
            pass: diff <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

fn numeric_flagship() -> Option<QesSolution> {
    let problem = QesProblem::new(2, Parity::Even, 1.0);
    let found = solve::find_solutions(&problem, &ScanSettings::for_problem(&problem), &NewtonSettings::default()).ok()?;
    Selection::LowestEnergy.pick(found)
}

fn coupling_rows(checks: &mut Vec<Check>, label: &str, sol: Option<&QesSolution>) {
    let get = |f: fn(&QesSolution) -> f64| sol.map(f).unwrap_or(f64::NAN);
    checks.push(Check::new(&format!("q {label}"), 4.3416, get(|s| s.coeffs.q), ROUNDED_TOL));
    checks.push(Check::new(&format!("r {label}"), 2.6875, get(|s| s.coeffs.r), ROUNDED_TOL));
    checks.push(Check::new(&format!("s {label}"), -1.6584, get(|s| s.coeffs.s), ROUNDED_TOL));
}

pub fn run() -> Report {
    let mut checks = Vec::new();
    let plus = closed_form::solution_n2(1.0, RootSign::Plus, RootSign::Plus).ok();
    let minus_b = closed_form::solution_n2(-1.0, RootSign::Plus, RootSign::Plus).ok();

    coupling_rows(&mut checks, "(b=1, closed form)", plus.as_ref());
    coupling_rows(&mut checks, "(b=1, numeric)", numeric_flagship().as_ref());

    let root5 = 5f64.sqrt();
    let k = -1.0 + 1.0 / root5;
    let get = |f: fn(&QesSolution) -> f64| plus.as_ref().map(f).unwrap_or(f64::NAN);
    checks.push(Check::new("a exact (-15+3*sqrt5)/20", (-15.0 + 3.0 * root5) / 20.0, get(|s| s.params.a), EXACT_TOL));
    checks.push(Check::new("q exact 3(1+1/sqrt5)", 3.0 * (1.0 + 1.0 / root5), get(|s| s.coeffs.q), EXACT_TOL));
    checks.push(Check::new("r exact 2+9(-1+1/sqrt5)^2/4", 2.0 + 9.0 * k * k / 4.0, get(|s| s.coeffs.r), EXACT_TOL));
    checks.push(Check::new("s exact 3(-1+1/sqrt5)", 3.0 * k, get(|s| s.coeffs.s), EXACT_TOL));
    checks.push(Check::new("nodes (b=1)", 0.0, get(|s| s.nodes as f64), 0.0));
    checks.push(Check::new(
        "nodes (b=-1)",
        2.0,
        minus_b.as_ref().map(|s| s.nodes as f64).unwrap_or(f64::NAN),
        0.0,
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    Report { checks, all_pass }
}

pub fn render_table(report: &Report) -> String {
    let mut out = format!(
        "{:<30} {:>22} {:>22} {:>10}  {}\n",
        "quantity", "reference", "computed", "|diff|", "status"
    );
    for c in &report.checks {
        out.push_str(&format!(
            "{:<30} {:>22.15} {:>22.15} {:>10.2e}  {}\n",
            c.quantity,
            c.reference,
            c.computed,
            c.diff,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}
