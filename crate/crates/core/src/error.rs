use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("subsystem index {index} out of range for a layout with {len} factors")]
    InvalidSubsystem { index: usize, len: usize },

    #[error("Kraus set is not complete on the target (max deviation {deviation:.3e})")]
    IncompleteKraus { deviation: f64 },

    #[error("projection onto an outcome with zero probability")]
    ZeroProbability,

    #[error("basis vector is not normalized (norm^2 = {0})")]
    UnnormalizedBasis(f64),

    #[error("expected a {expected}x{expected} operator, got {rows}x{cols}")]
    Dimension { expected: usize, rows: usize, cols: usize },

    #[error("integrator failed: {0}")]
    Integration(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("inconsistent rounds record: {0}")]
    RoundsRecord(String),

    #[error("no heralded attempt in {trajectories} trajectories")]
    NoHeralds { trajectories: u64 },

    #[error("engine limit: {0}")]
    EngineLimit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
