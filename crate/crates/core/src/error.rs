//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unknown model '{name}'; available: {available}")]
    UnknownModel { name: String, available: String },

    #[error("model returned a non-finite {what} at x={x:?}, t={t}, xi={xi:?}")]
    NonFinite {
        what: &'static str,
        x: Vec<f64>,
        t: f64,
        xi: Vec<f64>,
    },

    #[error("velocity Hessian is asymmetric (skew {skew:.3e} exceeds 1e-12)")]
    AsymmetricHessian { skew: f64 },

    #[error("conjugate solve stalled after {iters} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    ConjugateStalled {
        iters: usize,
        residual: f64,
        tol: f64,
    },

    #[error("velocity Hessian is not positive definite at x={x:?}, t={t}, xi={xi:?}")]
    IndefiniteHessian { x: Vec<f64>, t: f64, xi: Vec<f64> },

    #[error("no superlinearity bound b_a is available for a = {a}")]
    MissingBound { a: f64 },

    #[error("path does not match the problem: {what}")]
    EndpointMismatch { what: &'static str },

    #[error("Hamiltonian flow left the finite domain near s = {s}")]
    FlowDiverged { s: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
