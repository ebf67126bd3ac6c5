use thiserror::Error;

/// Every failure surfaced by the library.
///
/// The variants partition the error classes the command-line harness maps
/// onto exit codes: configuration/usage, training invariants, and data/shape.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("freeze violation: frozen parameter `{param}` changed during stage {stage}")]
    FreezeViolation { param: String, stage: u8 },

    #[error("non-finite gradient for `{param}`; step rejected")]
    NonFiniteGradient { param: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape(format!("{op}: incompatible shapes {lhs:?} and {rhs:?}"))
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// True for errors caused by a broken training invariant.
    pub fn is_training_invariant(&self) -> bool {
        matches!(
            self,
            Error::FreezeViolation { .. } | Error::NonFiniteGradient { .. }
        )
    }
}
