use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// One broken constraint in a configuration value.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub value: String,
    pub constraint: String,
}

impl Violation {
    pub fn new(key: impl Into<String>, value: impl ToString, constraint: impl Into<String>) -> Self {
        Violation {
            key: key.into(),
            value: value.to_string(),
            constraint: constraint.into(),
        }
    }

    /// Nests the key under `prefix`, as in `network.q`.
    pub fn under(mut self, prefix: &str) -> Self {
        self.key = format!("{prefix}.{}", self.key);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.key, self.value, self.constraint)
    }
}

/// Turns a list of violations into a single configuration error.
pub fn check(violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        return Ok(());
    }
    let msg = violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::Config(msg))
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stub matching failed for seed {seed}: {reason}")]
    Sampling { seed: u64, reason: String },

    #[error("non-finite state at t = {time}")]
    NumericalBlowup { time: f64 },

    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("no records match group `{0}`")]
    EmptyGroup(String),

    #[error("{context}: {source}")]
    Annotated {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a description of where it happened.
    pub fn annotate(self, context: impl Into<String>) -> Self {
        Error::Annotated {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is bad input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Bracket { .. } | Error::Json(_) => true,
            Error::Annotated { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
