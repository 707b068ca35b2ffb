use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient nodes: need at least {need}, got {got}")]
    InsufficientNodes { need: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate metric at r = {r}")]
    DegenerateMetric { r: f64 },
    #[error("metric degenerates: 1 - F changes sign on the grid near r = {r}")]
    Horizon { r: f64 },
    #[error("AE profile range exceeded: rho = {rho} outside [{lo}, {hi}]")]
    AeRangeExceeded { rho: f64, lo: f64, hi: f64 },
    #[error("insufficient asymptotic range: rho1/rho0 = {ratio} < 8")]
    InsufficientAsymptoticRange { ratio: f64 },
    #[error("undefined angular mode: {0}")]
    UndefinedMode(String),
    #[error("mode system singular on this annulus")]
    SingularMode,
    #[error("singular linear system (zero pivot at row {row})")]
    Singular { row: usize },
    #[error("linear solve not converged: relative residual {residual:e} > {tol:e}")]
    LinearNotConverged { residual: f64, tol: f64 },
    #[error("conformal factor not positive at node {node}")]
    NonPositiveConformalFactor { node: usize },
    #[error("contraction failure: ratios {ratios:?}")]
    ContractionFailure { ratios: Vec<f64> },
    #[error("max iterations ({0}) exceeded")]
    MaxIterations(usize),
    #[error("derivative order {0} not available")]
    DerivativeOrder(usize),
    #[error("empty subset: no grid nodes in [{lo}, {hi}]")]
    EmptySubset { lo: f64, hi: f64 },
    #[error("x_P = {x} outside the gluing band ({lo}, {hi})")]
    ChartOutOfBand { x: f64, lo: f64, hi: f64 },
    #[error("compact set not admissible for this epsilon: {0}")]
    NotAdmissible(String),
    #[error("fit needs at least 4 finite positive values: {0}")]
    BadSeries(String),
    #[error("eigensolve failure: {0}")]
    Eigen(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Coarse classification used by the CLI for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InsufficientNodes { .. }
            | InvalidGrid(_)
            | UndefinedMode(_)
            | DerivativeOrder(_)
            | EmptySubset { .. }
            | ChartOutOfBand { .. }
            | NotAdmissible(_)
            | BadSeries(_)
            | Config(_)
            | Parse { .. }
            | Io { .. }
            | InsufficientAsymptoticRange { .. }
            | AeRangeExceeded { .. }
            | Horizon { .. } => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Error::Io { path: path.display().to_string(), msg: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
