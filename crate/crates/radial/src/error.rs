use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("table error: {0}")]
    Table(String),

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("trajectory does not cover [{lo}, {hi}]")]
    Coverage { lo: f64, hi: f64 },

    #[error("no contraction: residual ratio {ratio:.3e} after {iterations} iterations")]
    NoContraction { ratio: f64, iterations: usize },

    #[error("value {value:.6e} outside the admissible window [{lo:.6e}, {hi:.6e}]")]
    Window { value: f64, lo: f64, hi: f64 },

    #[error("singular solution vanishes at r = {r0:.6e} before the matching radius")]
    Positivity { r0: f64 },

    #[error("not bracketed: {0}")]
    NotBracketed(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
