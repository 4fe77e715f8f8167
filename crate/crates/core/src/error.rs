use thiserror::Error;

use crate::fbs::SolutionPath;

/// Errors produced by the model, solver, calibration and scenario layers.
#[derive(Debug, Error)]
pub enum SvirError {
    /// An argument violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A formula is undefined for the given parameters (zero denominator).
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory left the admissible region during integration.
    #[error("integration became unstable at step {step} (t = {time}): {reason}")]
    Instability { step: usize, time: f64, reason: String },

    /// A numerical routine (root finder, least squares) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The forward-backward sweep hit its iteration cap. The last iterate is
    /// kept so callers can still report it.
    #[error(
        "forward-backward sweep did not converge after {iterations} iterations (last relative change {rel_change:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        rel_change: f64,
        path: Box<SolutionPath>,
    },

    /// A configuration or data field failed validation. `field` is a dotted
    /// path such as `model.beta0` or `data:row 12`.
    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SvirError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SvirError::InvalidInput(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        SvirError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 validation, 3 numerical, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            SvirError::InvalidInput(_) | SvirError::Validation { .. } | SvirError::Io { .. } => 2,
            SvirError::Domain(_) | SvirError::Instability { .. } | SvirError::Numerical(_) => 3,
            SvirError::NonConvergence { .. } => 4,
        }
    }
}

pub type Result<T, E = SvirError> = std::result::Result<T, E>;
