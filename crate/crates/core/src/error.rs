use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point budget exceeded: {points} points > budget {budget}")]
    BudgetExceeded { points: usize, budget: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("symbol is not finite at lattice index {index}")]
    NonFiniteSymbol { index: usize },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("krylov propagator did not converge: {0}")]
    NotConverged(String),
    #[error("fit window has {0} usable points, need at least 4")]
    DegenerateWindow(usize),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
