use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon truncation must be at least 1 (got {0})")]
    InvalidTruncation(usize),

    #[error("subsystem slot {slot} out of range for {count} subsystems")]
    SlotOutOfRange { slot: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (relative defect {0:.3e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("matrix is singular or numerically rank deficient (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dressed levels are degenerate: {0}")]
    Degenerate(String),

    #[error("one-qubit photon flux {0:.3e} is below the witness floor")]
    UndefinedWitness(f64),

    #[error("time integration did not reach steady state by t = {t_end} (last relative change {last_delta:.3e})")]
    NotConverged { t_end: f64, last_delta: f64 },

    #[error("density matrix check failed: {0}")]
    StateCheck(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
