//! Serialized form of a solution plus its diagnostic residuals.

use qes_core::model::{ExponentParams, Parity, PotentialCoeffs, QesProblem, QesSolution};
use qes_core::{oracle, solve};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
/// Points in `[-6, 6]` used for the Schrodinger residual. The count is even
/// so the origin is never sampled.
pub const RESIDUAL_POINTS: usize = 200;
pub const RESIDUAL_HALF_WIDTH: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub rec1: f64,
    pub rec2: f64,
    pub schrodinger_max: f64,
    pub eigen_gap: f64,
    #[serde(rename = "oracle_dE")]
    pub oracle_de: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub degree: usize,
    #[serde(with = "parity_text")]
    pub parity: Parity,
    pub branch: usize,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    #[serde(rename = "A")]
    pub abs_a: f64,
    #[serde(rename = "B")]
    pub abs_b: f64,
    #[serde(rename = "C")]
    pub abs_c: f64,
    pub p: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub v: Vec<f64>,
    pub n: usize,
    pub norm: f64,
    pub residuals: Residuals,
}

pub fn residual_grid() -> Vec<f64> {
    oracle::uniform_points(RESIDUAL_HALF_WIDTH, RESIDUAL_POINTS)
}

/// Recurrence residuals at `(a, p)`, the Schrodinger residual at the
/// claimed energy and the distance from `p` to the spectrum of `M`.
pub fn compute_residuals(sol: &QesSolution) -> qes_core::Result<Residuals> {
    let rec = solve::propagate_coefficients(sol.params, sol.p, sol.degree(), sol.parity())?;
    Ok(Residuals {
        rec1: rec.residual_1,
        rec2: rec.residual_2,
        schrodinger_max: oracle::residual_check(sol, &residual_grid())?,
        eigen_gap: solve::eigen_crosscheck(sol)?.distance,
        oracle_de: None,
    })
}

impl SolutionRecord {
    pub fn new(sol: &QesSolution, residuals: Residuals) -> Self {
        let (abs_a, abs_b, abs_c) = sol.coeffs.abstract_form();
        Self {
            schema_version: SCHEMA_VERSION,
            degree: sol.degree(),
            parity: sol.parity(),
            branch: sol.problem.branch,
            a: sol.params.a,
            b: sol.params.b,
            q: sol.coeffs.q,
            r: sol.coeffs.r,
            s: sol.coeffs.s,
            abs_a,
            abs_b,
            abs_c,
            p: sol.p,
            energy: sol.energy,
            v: sol.v.clone(),
            n: sol.nodes,
            norm: sol.norm,
            residuals,
        }
    }

    /// Rebuilds the solution exactly as stored, including a possibly
    /// inconsistent energy, so that verification can judge it.
    pub fn to_solution(&self) -> Result<QesSolution, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.v.len() != self.degree + 1 {
            return Err(format!("N = {} needs {} coefficients, found {}", self.degree, self.degree + 1, self.v.len()));
        }
        if self.branch > self.degree {
            return Err(format!("branch {} outside [0, {}]", self.branch, self.degree));
        }
        let values = [self.a, self.b, self.q, self.r, self.s, self.p, self.energy, self.norm];
        if values.iter().chain(self.v.iter()).any(|x| !x.is_finite()) {
            return Err("record contains non-finite numbers".into());
        }
        Ok(QesSolution {
            problem: QesProblem::new(self.degree, self.parity, self.b).with_branch(self.branch),
            params: ExponentParams::new(self.a, self.b),
            coeffs: PotentialCoeffs::new(self.q, self.r, self.s),
            p: self.p,
            energy: self.energy,
            v: self.v.clone(),
            nodes: self.n,
            norm: self.norm,
        })
    }
}

/// A sweep line: either a full record or a gap marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepLine {
    Solution(Box<SolutionRecord>),
    Gap { b: f64, status: String },
}

pub const STATUS_NO_REAL_SOLUTION: &str = "no_real_solution";
pub const STATUS_SKIPPED_B_ZERO: &str = "skipped_b_zero";

mod parity_text {
    use qes_core::Parity;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(parity: &Parity, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(parity.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Parity, D::Error> {
        let text = String::deserialize(de)?;
        text.parse().map_err(D::Error::custom)
    }
}
