use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residuals {residual_1:.3e}, {residual_2:.3e})")]
    NoConvergence {
        iterations: usize,
        residual_1: f64,
        residual_2: f64,
    },

    #[error("leading coefficient v_N = {leading:.3e} vanishes relative to max |v_k| = {max_coeff:.3e}; the state belongs to a smaller degree")]
    DegenerateLeadingCoefficient { leading: f64, max_coeff: f64 },

    #[error("Hessenberg QR failed to converge after {sweeps} sweeps")]
    EigenFailure { sweeps: usize },

    #[error("scan found no local minimum of the residual below {threshold:.3e}")]
    EmptyScan { threshold: f64 },

    #[error("negative discriminant {discriminant:.6e}: the root is complex")]
    ComplexRoot { discriminant: f64 },

    #[error("b = 0 is excluded from the closed-form N = 2 branch")]
    ZeroB,

    #[error("v = 0 makes the N = 2 energy formula singular")]
    ZeroV,

    #[error("sign pairing does not solve the full N = 2 system (residual {residual:.3e})")]
    InconsistentRoots { residual: f64 },

    #[error("adjacent grid eigenvalues {lower} and {upper} are closer than the bisection resolution")]
    GridTooCoarse { lower: f64, upper: f64 },

    #[error("no grid eigenvalue with {parity} parity and {nodes} nodes within {window:.3e} of E = {energy}")]
    NoMatch {
        energy: f64,
        parity: crate::model::Parity,
        nodes: usize,
        window: f64,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("near-zero plateau of the wave function around x = {x} spans more than three grid cells")]
    AmbiguousNode { x: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
