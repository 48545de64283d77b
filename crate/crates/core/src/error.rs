use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("cannot build a spin state from a zero vector")]
    ZeroVector,

    #[error("undamped oscillator undefined classification (omega = 0)")]
    UndefinedClassification,

    #[error("reference integration diverged at t = {t}")]
    ReferenceDiverged { t: f64 },

    #[error("step produced degenerate state (norm {norm:e}) at t = {t}")]
    DegenerateStep { t: f64, norm: f64 },

    #[error("window unresolvable at this sampling rate (spacing {spacing} > tau/10 = {limit})")]
    WindowUnresolvable { spacing: f64, limit: f64 },

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("worker pool: {0}")]
    WorkerPool(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}
