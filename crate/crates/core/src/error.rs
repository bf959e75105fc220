use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("iteration did not converge: {0}")]
    NoConvergence(&'static str),

    #[error("pair (A, B) could not be stabilized")]
    NotStabilizable,

    #[error("plant is invalid: {0}")]
    InvalidPlant(String),

    #[error("limited output is neither relative degree zero nor one")]
    UnsupportedOutput,

    #[error("integral gain K_I is singular")]
    GainSingular,

    #[error("constraint gain matrix {0} is singular")]
    SingularGain(&'static str),

    #[error("bad limits in channel {channel}: min {min} is not below max {max}")]
    BadLimits { channel: usize, min: f64, max: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("QP is infeasible")]
    Infeasible,

    #[error("state magnitude exceeded {limit:e} at t = {t} s")]
    NumericBlowup { t: f64, limit: f64 },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
