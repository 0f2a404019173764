use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("too many Jacobian directions: {0} (limit 16)")]
    TooManyVertices(usize),

    #[error("shape mismatch: {0}")]
    ShapeError(String),

    #[error("expression is not affine: {0}")]
    NotAffine(String),

    #[error("bisection endpoints do not bracket the boundary: {0}")]
    BracketError(String),

    #[error("system is not Hurwitz (spectral abscissa {0:.3e})")]
    UnstableSystem(f64),

    #[error("initial problem is infeasible: {0}")]
    InitInfeasible(String),

    #[error("solver failure at iteration {iteration}: {status}")]
    SolverFailure { iteration: usize, status: String },

    #[error("simulation diverged at t = {time:.4} s (state norm {norm:.3e})")]
    DivergenceDetected { time: f64, norm: f64 },

    #[error("calibration needs at least {needed} attack-free traces, got {got}")]
    EmptyCalibrationSet { needed: usize, got: usize },

    #[error("degenerate window: pre-onset maximum {0:.3e} below guard")]
    DegenerateWindow(f64),

    #[error("{path}:{line}: {field}: {message}")]
    Config {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
