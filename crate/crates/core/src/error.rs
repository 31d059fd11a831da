//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by channel synthesis, detection, analysis and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Operand shapes do not conform.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The pilot Gram matrix `x̄_t x̄_tᵀ` cannot be inverted.
    #[error("pilot matrix is rank deficient ({rows} rows, {cols} columns)")]
    RankDeficientPilots { rows: usize, cols: usize },

    /// `H̄ H̄ᵀ` fails the singular-value ratio test used before inversion.
    #[error("equivalent channel is rank deficient: singular value ratio {ratio:.3e} below {tolerance:.1e}")]
    RankDeficientChannel { ratio: f64, tolerance: f64 },

    /// Exhaustive search over the constellation would exceed the cap.
    #[error("exhaustive search over {candidates} candidates exceeds the cap of {cap}")]
    SearchTooLarge { candidates: u128, cap: u128 },

    /// A truncated series did not reach its tail tolerance.
    #[error("series truncated after {terms} diagonals: partial sum {partial:.6e}, tail bound {bound:.3e}")]
    Truncation { partial: f64, bound: f64, terms: usize },

    /// Scenario file or command-line configuration problem.
    #[error("config error{}: {message}", location(*line, key))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    /// Filesystem failure, always carrying the offending path.
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A failure while evaluating one grid point of an experiment.
    #[error("at {axis} = {x}: {source}")]
    AtPoint {
        axis: String,
        x: f64,
        #[source]
        source: Box<Error>,
    },

    /// Malformed CSV while reading back an exported curve.
    #[error("csv error on {}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
}

fn location(line: Option<usize>, key: &Option<String>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l} (key `{k}`)"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" (key `{k}`)"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Tags the error with the grid point it came from.
    pub fn at_point(self, axis: &str, x: f64) -> Self {
        Error::AtPoint {
            axis: axis.to_string(),
            x,
            source: Box::new(self),
        }
    }

    pub(crate) fn config_key(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line runner.
    ///
    /// 2 for configuration problems, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => 2,
            Error::SearchTooLarge { .. } => 2,
            Error::RankDeficientPilots { .. }
            | Error::RankDeficientChannel { .. }
            | Error::Truncation { .. } => 3,
            Error::Io { .. } | Error::Csv { .. } => 4,
            Error::AtPoint { source, .. } => source.exit_code(),
        }
    }
}
