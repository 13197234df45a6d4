use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qes_core::closed_form::{self, RootSign};
use qes_core::oracle::{self, GridSpec};
use qes_core::solve::{self, NewtonSettings, ScanSettings, Selection, SweepSeed, SweepStatus};
use qes_core::{wavefield, Error, Parity, QesProblem, QesSolution};
use serde::Serialize;

mod record;
mod reproduce;

use record::{SolutionRecord, SweepLine};

const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_USAGE: u8 = 64;

const DEFAULT_ENERGY_TOL: f64 = 1e-6;
const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
const EIGEN_GAP_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "qes", version, about = "Quasi-exactly solvable states of V(x) = A|x| + Bx^2 + C|x|^3 + x^4")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct one state and write it as JSON.
    Construct(ConstructArgs),
    /// Follow a family of states in b, one JSON line per point.
    Sweep(SweepArgs),
    /// Check a stored state against the finite-difference spectrum.
    Verify(VerifyArgs),
    /// Tabulate x, V, psi, psi' as CSV.
    Sample(SampleArgs),
    /// Check the published N = 2 numbers.
    #[command(alias = "reproduce-paper")]
    Reproduce(ReproduceArgs),
}

#[derive(clap::Args)]
struct ConstructArgs {
    /// Polynomial degree N.
    #[arg(long = "n")]
    degree: usize,
    #[arg(long)]
    parity: Parity,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// Eigenvalue index; with --closed-form 0 selects a+ and 1 selects a-.
    #[arg(long)]
    branch: Option<usize>,
    #[arg(long, allow_hyphen_values = true, requires = "guess_p")]
    guess_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "guess_a")]
    guess_p: Option<f64>,
    /// Use the exact formulas (N = 2, even parity only).
    #[arg(long)]
    closed_form: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long = "n")]
    degree: usize,
    #[arg(long)]
    parity: Parity,
    #[arg(long, allow_hyphen_values = true)]
    b_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    b_max: f64,
    #[arg(long)]
    steps: usize,
    /// Start on the state with this eigenvalue index instead of the lowest energy.
    #[arg(long)]
    branch: Option<usize>,
    #[arg(long, allow_hyphen_values = true, requires = "guess_p")]
    guess_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "guess_a")]
    guess_p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    solution: PathBuf,
    /// Grid half-width; defaults to max(8, support of the state).
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long = "h", default_value_t = oracle::DEFAULT_STEP)]
    step: f64,
    #[arg(long = "k", default_value_t = 8)]
    states: usize,
    #[arg(long, default_value_t = DEFAULT_ENERGY_TOL)]
    energy_tol: f64,
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_TOL)]
    residual_tol: f64,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct SampleArgs {
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
    x_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 3.0)]
    x_max: f64,
    #[arg(long, default_value_t = 601)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReproduceArgs {
    #[arg(long)]
    json: bool,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::NoConvergence { .. }
            | Error::ComplexRoot { .. }
            | Error::DegenerateLeadingCoefficient { .. }
            | Error::EmptyScan { .. }
            | Error::EigenFailure { .. } => EXIT_NO_CONVERGENCE,
            Error::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Self {
            code: 1,
            message: format!("{err:#}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Construct(args) => construct(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify(args) => verify(args),
        Command::Sample(args) => sample(args),
        Command::Reproduce(args) => reproduce_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("QES_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", p.display()).into()),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| anyhow::anyhow!("cannot write to stdout: {e}").into())
        }
    }
}

fn check_b(b: f64) -> CmdResult {
    if b.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage(format!("b must be finite, got {b}")))
    }
}

fn check_degree(degree: usize, parity: Parity) -> CmdResult {
    if degree == 0 && parity == Parity::Odd {
        return Err(Failure::usage("odd states need N >= 1"));
    }
    Ok(())
}

fn selection(branch: Option<usize>) -> Selection {
    branch.map_or(Selection::LowestEnergy, Selection::Branch)
}

fn construct_solution(args: &ConstructArgs) -> Result<QesSolution, Failure> {
    check_b(args.b)?;
    check_degree(args.degree, args.parity)?;
    if let Some(j) = args.branch {
        if j > args.degree {
            return Err(Failure::usage(format!("branch {j} outside [0, {}]", args.degree)));
        }
    }
    if args.closed_form {
        if args.degree != 2 || args.parity != Parity::Even {
            return Err(Failure::usage("--closed-form exists only for N = 2, even parity"));
        }
        let sign_a = match args.branch {
            None | Some(0) => RootSign::Plus,
            Some(1) => RootSign::Minus,
            Some(j) => return Err(Failure::usage(format!("closed-form branch must be 0 (a+) or 1 (a-), got {j}"))),
        };
        return Ok(closed_form::consistent_solution_n2(args.b, sign_a)?);
    }
    let problem = QesProblem::new(args.degree, args.parity, args.b);
    let settings = NewtonSettings::default();
    if let (Some(a), Some(p)) = (args.guess_a, args.guess_p) {
        return Ok(solve::solve_at_b(&problem, (a, p), &settings)?);
    }
    let found = solve::find_solutions(&problem, &ScanSettings::for_problem(&problem), &settings)?;
    let count = found.len();
    selection(args.branch).pick(found).ok_or_else(|| Failure {
        code: EXIT_NO_CONVERGENCE,
        message: format!(
            "the scan at b = {} converged to {count} state(s), none on the requested branch",
            args.b
        ),
    })
}

fn checked_record(sol: &QesSolution) -> Result<SolutionRecord, Failure> {
    let residuals = record::compute_residuals(sol)?;
    let gap_limit = EIGEN_GAP_TOL * (1.0 + sol.p.abs());
    if !(residuals.schrodinger_max <= DEFAULT_RESIDUAL_TOL) {
        return Err(Failure::validation(format!(
            "Schrodinger residual {:.3e} exceeds {DEFAULT_RESIDUAL_TOL:e}",
            residuals.schrodinger_max
        )));
    }
    if !(residuals.eigen_gap <= gap_limit) {
        return Err(Failure::validation(format!(
            "p is {:.3e} away from the spectrum of M (limit {gap_limit:.3e})",
            residuals.eigen_gap
        )));
    }
    Ok(SolutionRecord::new(sol, residuals))
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> Result<String, Failure> {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    };
    text.map_err(|e| anyhow::anyhow!("serialization failed: {e}").into())
}

fn construct(args: ConstructArgs) -> CmdResult {
    let sol = construct_solution(&args)?;
    let rec = checked_record(&sol)?;
    let mut text = to_json(&rec, true)?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn sweep(args: SweepArgs) -> CmdResult {
    check_degree(args.degree, args.parity)?;
    let template = QesProblem::new(args.degree, args.parity, args.b_min);
    let seed = match (args.guess_a, args.guess_p) {
        (Some(a), Some(p)) => SweepSeed::Guess(a, p),
        _ => SweepSeed::Scan(ScanSettings::for_problem(&template), selection(args.branch)),
    };
    let points = solve::sweep(&template, args.b_min, args.b_max, args.steps, seed, &NewtonSettings::default())?;
    let mut text = String::new();
    let mut converged = 0;
    for point in &points {
        let line = match &point.status {
            SweepStatus::Converged(sol) => {
                converged += 1;
                SweepLine::Solution(Box::new(SolutionRecord::new(sol, record::compute_residuals(sol)?)))
            }
            SweepStatus::NoRealSolution(_) => SweepLine::Gap {
                b: point.b,
                status: record::STATUS_NO_REAL_SOLUTION.into(),
            },
            SweepStatus::Skipped => SweepLine::Gap {
                b: point.b,
                status: record::STATUS_SKIPPED_B_ZERO.into(),
            },
        };
        text.push_str(&to_json(&line, false)?);
        text.push('\n');
    }
    write_output(args.out.as_deref(), &text)?;
    if converged == 0 {
        return Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: "no sweep point converged".into(),
        });
    }
    Ok(())
}

fn read_record(path: &Path) -> Result<(SolutionRecord, QesSolution), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let rec: SolutionRecord = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("malformed record {}: {e}", path.display())))?;
    let sol = rec.to_solution().map_err(Failure::validation)?;
    Ok((rec, sol))
}

#[derive(Serialize)]
struct VerifyReport {
    pass: bool,
    energy: f64,
    nodes: usize,
    parity: String,
    matched_index: Option<usize>,
    grid_method: Option<String>,
    grid_half_width: f64,
    grid_step: f64,
    delta_e_raw: Option<f64>,
    #[serde(rename = "delta_E_extrapolated")]
    delta_e_extrapolated: Option<f64>,
    residuals: record::Residuals,
    failures: Vec<String>,
}

fn verify(args: VerifyArgs) -> CmdResult {
    let (_, sol) = read_record(&args.solution)?;
    let spec = match args.half_width {
        Some(l) => GridSpec::new(l, args.step)?,
        None => GridSpec::for_solution(&sol, args.step)?,
    };
    let mut failures = Vec::new();
    let mut no_match = None;

    let consistency = qes_core::PotentialCoeffs::from_exponent(sol.params, sol.degree());
    let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + y.abs());
    if rel(sol.coeffs.q, consistency.q) > 1e-14 || rel(sol.coeffs.r, consistency.r) > 1e-14 || sol.coeffs.s != consistency.s {
        failures.push("couplings (q, r, s) do not match (a, b, N)".to_string());
    }
    if sol.energy != -sol.p {
        failures.push(format!("E = {} is not -p = {}", sol.energy, -sol.p));
    }

    let report = match oracle::verify_energy(&sol, &spec, args.states) {
        Ok(r) => Some(r),
        Err(e) => {
            if matches!(e, Error::NoMatch { .. }) {
                no_match = Some(e.to_string());
            }
            failures.push(e.to_string());
            None
        }
    };
    if let Some(r) = &report {
        if !(r.delta_extrapolated <= args.energy_tol) {
            failures.push(format!(
                "extrapolated |dE| = {:.3e} exceeds {:e}",
                r.delta_extrapolated, args.energy_tol
            ));
        }
    }
    let mut residuals = record::compute_residuals(&sol)?;
    residuals.oracle_de = report.as_ref().map(|r| r.delta_extrapolated);
    if !(residuals.schrodinger_max <= args.residual_tol) {
        failures.push(format!(
            "Schrodinger residual {:.3e} exceeds {:e}",
            residuals.schrodinger_max, args.residual_tol
        ));
    }

    let out = VerifyReport {
        pass: failures.is_empty(),
        energy: sol.energy,
        nodes: sol.nodes,
        parity: sol.parity().to_string(),
        matched_index: report.as_ref().map(|r| r.index),
        grid_method: report.as_ref().map(|r| format!("{:?}", r.method)),
        grid_half_width: spec.half_width,
        grid_step: spec.step,
        delta_e_raw: report.as_ref().map(|r| r.delta_raw),
        delta_e_extrapolated: report.as_ref().map(|r| r.delta_extrapolated),
        residuals,
        failures,
    };
    let text = if args.json {
        to_json(&out, true)? + "\n"
    } else {
        render_verify(&out)
    };
    write_output(None, &text)?;
    if out.pass {
        Ok(())
    } else {
        Err(Failure::validation(no_match.unwrap_or_else(|| out.failures.join("; "))))
    }
}

fn render_verify(r: &VerifyReport) -> String {
    let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    let mut s = String::new();
    s.push_str(&format!("state        {} parity, {} nodes, E = {}\n", r.parity, r.nodes, r.energy));
    s.push_str(&format!("grid         L = {}, h = {}\n", r.grid_half_width, r.grid_step));
    s.push_str(&format!(
        "match        index {} ({})\n",
        r.matched_index.map_or("none".to_string(), |i| i.to_string()),
        r.grid_method.as_deref().unwrap_or("n/a")
    ));
    s.push_str(&format!("|dE| raw     {}\n", opt(r.delta_e_raw)));
    s.push_str(&format!("|dE| extrap  {}\n", opt(r.delta_e_extrapolated)));
    s.push_str(&format!("residual     {:.3e}\n", r.residuals.schrodinger_max));
    s.push_str(&format!("eigen gap    {:.3e}\n", r.residuals.eigen_gap));
    for f in &r.failures {
        s.push_str(&format!("failure      {f}\n"));
    }
    s.push_str(if r.pass { "PASS\n" } else { "FAIL\n" });
    s
}

/// Decimal text with `digits` significant digits, switching to exponent
/// notation for very large or small magnitudes.
fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exponent) {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        let text = format!("{x:.decimals$}");
        if text.contains('.') {
            text.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            text
        }
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

fn sample(args: SampleArgs) -> CmdResult {
    let (_, sol) = read_record(&args.solution)?;
    let table = wavefield::sample(&sol, args.x_min, args.x_max, args.points)?;
    let mut text = String::from("x,V,psi,psi_prime\n");
    for row in &table.rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            format_sig(row.x, 12),
            format_sig(row.potential, 12),
            format_sig(row.psi, 12),
            format_sig(row.psi_prime, 12)
        ));
    }
    write_output(args.out.as_deref(), &text)
}

fn reproduce_cmd(args: ReproduceArgs) -> CmdResult {
    let report = reproduce::run();
    let text = if args.json {
        to_json(&report, true)? + "\n"
    } else {
        reproduce::render_table(&report)
    };
    write_output(None, &text)?;
    if report.all_pass {
        Ok(())
    } else {
        Err(Failure::validation("at least one reference value did not reproduce"))
    }
}
