use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("spectral field is not the transform of a real field (imaginary residual {residual:.3e}, real magnitude {magnitude:.3e})")]
    NonRealField { residual: f64, magnitude: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("missing dimensional parameters (beta, d_s, d_i)")]
    MissingDimensionalParameters,

    #[error("picard iteration did not converge after {iterations} iterations (last difference {last_diff:.3e}, tolerance {tol:.3e})")]
    NonConvergence {
        iterations: usize,
        last_diff: f64,
        tol: f64,
    },

    #[error("picard iteration diverged at iteration {iteration}: iterate norm {norm:.6e} exceeds {limit:.6e}")]
    Divergence {
        iteration: usize,
        norm: f64,
        limit: f64,
    },

    #[error("data not admitted by the empirical gate: {0}")]
    NotAdmitted(String),

    #[error("reaction step overflow at t = {time:.6e} (field magnitude {magnitude:.3e})")]
    ReactionOverflow { time: f64, magnitude: f64 },

    #[error("quadrature did not converge: estimate {estimate:.16e}, error {error:.3e} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
