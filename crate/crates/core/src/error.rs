use thiserror::Error;

/// Errors produced by the simulation kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The single-particle gap of the realization is (numerically) closed, so
    /// the orthogonal factor of `Z = A - B` is not well defined.
    #[error("gapless realization: smallest singular value {smallest:e} below tolerance {tolerance:e}")]
    GaplessRealization { smallest: f64, tolerance: f64 },

    /// The central-difference derivative did not agree with its half-step
    /// counterpart.
    #[error("derivative not converged: chi(delta) = {coarse:e}, chi(delta/2) = {fine:e}")]
    NonConvergedDerivative { coarse: f64, fine: f64 },

    #[error("fidelity {0} outside [0, 1] beyond rounding")]
    FidelityOutOfRange(f64),

    /// More realizations failed at a grid point than the configured tolerance allows.
    #[error("unreliable point: {failed} of {total} realizations failed (tolerance {fail_tol})")]
    PointUnreliable {
        failed: usize,
        total: usize,
        fail_tol: f64,
    },

    /// `I + T` is singular, so the pairing matrix of the BCS form does not exist.
    #[error("Cayley transform undefined: smallest |pivot| of I + T is {0:e}")]
    CayleyUndefined(f64),

    #[error("chain too long for exact diagonalization: L = {length} > {max}")]
    TooLargeForExact { length: usize, max: usize },

    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
