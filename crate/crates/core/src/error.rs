use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {field} = {value} is not admissible")]
    Domain { field: &'static str, value: f64 },

    #[error("state left the admissible box at curve parameter {attempted}; last valid parameter {last_valid}")]
    Range { last_valid: f64, attempted: f64 },

    #[error("{stage}: no convergence after {iterations} iterations (residual {residual:e})")]
    Solver {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("interaction cap of {cap} exceeded at t = {time}")]
    InteractionCap { cap: usize, time: f64 },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for usage, configuration and i/o problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Usage(_) | Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
