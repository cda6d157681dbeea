use thiserror::Error;

/// Errors shared across the crate.
///
/// The enum is `Clone` so cached per-hypothesis computations can hand the
/// same failure to every trial that hits it.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An argument failed validation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A recursion, sample or power produced a non-finite value. The step
    /// index is 1-based.
    #[error("numeric overflow in {context} at step {step}")]
    Overflow { context: &'static str, step: usize },

    /// Every hypothesis in the class evaluated to a non-finite
    /// log-likelihood, so no selection is possible.
    #[error("all {count} hypothesis log-likelihoods are non-finite")]
    AllLikelihoodsNonFinite { count: usize },

    /// A dense computation was asked for above the size cap.
    #[error("dense path refused: n*d = {nd} exceeds cap {cap}")]
    SizeCap { nd: usize, cap: usize },

    /// A positive-definite factorization failed.
    #[error("positive-definite factorization failed in {0}")]
    FactorizationFailed(&'static str),

    /// Hypothesis-class constraint violated.
    #[error("invalid hypothesis class: {0}")]
    InvalidClass(String),

    /// A Monte-Carlo trial failed; the trial index is attached.
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    /// Configuration text failed validation; every finding is listed.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// Text that should encode a matrix, trajectory or number did not parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True when the root cause is numeric overflow (non-finite values),
    /// as opposed to bad input or I/O.
    pub fn is_overflow(&self) -> bool {
        match self {
            Error::Overflow { .. } | Error::AllLikelihoodsNonFinite { .. } => true,
            Error::Trial { source, .. } => source.is_overflow(),
            _ => false,
        }
    }

    pub(crate) fn at_trial(self, trial: usize) -> Error {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
