use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Physical geometry that the model cannot represent (coincident or
    /// intersecting bodies, inverted dimensions, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Evaluation point sits on a source singularity.
    #[error("singular point: {0}")]
    Singularity(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no bound state: {0}")]
    NoBoundState(String),

    #[error("eigensolver failure: {0}")]
    Eigensolve(String),

    /// Iterative method exceeded its budget. Carries the residual history
    /// sampled during the run.
    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("missing level (n={n}, m={m}) in spectrum")]
    MissingLevel { n: usize, m: i32 },

    /// Wavefunctions built from different sphere configurations were combined.
    #[error("states come from different configurations ({0:016x} vs {1:016x})")]
    MixedConfiguration(u64, u64),
}
