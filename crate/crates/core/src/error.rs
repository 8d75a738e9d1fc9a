use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wavefunction is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("support mask excludes {fraction:.3e} of the probability mass")]
    MaskTooLarge { fraction: f64 },

    #[error("flow is not potential (max curl magnitude {max_curl:.3e})")]
    NonPotentialFlow { max_curl: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("node formation at t = {time}: min density {min_density:.3e} below floor")]
    NodeFormation {
        time: f64,
        min_density: f64,
        last_state: Box<crate::hydro_solver::MadelungState>,
    },

    #[error("non-finite value produced at t = {time}")]
    NonFinite { time: f64 },

    #[error("series error: {0}")]
    Series(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
