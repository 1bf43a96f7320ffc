use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("invalid formula: {0}")]
    Formula(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid model: {0}")]
    Model(String),

    /// The likelihood could not be evaluated at the requested parameter
    /// (non-positive dispersion, overflow). Optimizers treat this as a
    /// rejected step.
    #[error("likelihood evaluation failed: {0}")]
    Evaluation(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("ill-conditioned {what} (determinants: {determinants:?})")]
    Conditioning { what: String, determinants: Vec<f64> },

    #[error("restricted log-likelihood {restricted} exceeds unrestricted {full}")]
    InconsistentFits { full: f64, restricted: f64 },

    #[error("adjustment undefined: U is zero")]
    UndefinedAdjustment,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("design file line {line}: {message}")]
    Design { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
