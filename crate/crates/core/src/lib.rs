//! Quasi-exactly solvable bound states of the symmetrized quartic
//! oscillator `V(x) = A|x| + B x^2 + C|x|^3 + x^4`.
//!
//! On `x < 0` a state is `P(x) exp(W(x))` with `W = x^3/3 + a x^2 + b x` and
//! `P` a polynomial of degree `N`; the right half is the even or odd
//! reflection. Requiring the reflected function to be smooth at the origin
//! fixes `a` (and the energy) for each `b`.
//!
//! * [`model`]: couplings, potential, exponent, the four-diagonal matrix.
//! * [`solve`]: recurrence, Newton solve, scans and continuation sweeps.
//! * [`closed_form`]: the exact even `N = 2` family.
//! * [`oracle`]: finite-difference reference spectrum.
//! * [`wavefield`]: evaluation, normalization, nodes and sampling.

pub mod closed_form;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solve;
pub mod wavefield;

pub use error::{Error, Result};
pub use model::{ExponentParams, Parity, PotentialCoeffs, QesProblem, QesSolution};
