use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("matrix is singular to working tolerance (pivot {pivot:e}, threshold {threshold:e})")]
    IllConditioned { pivot: f64, threshold: f64 },

    #[error("degenerate pencil: {0}")]
    DegeneratePencil(String),

    #[error("no null vector: smallest singular value {sigma_min:e} exceeds {threshold:e}")]
    NoNullVector { sigma_min: f64, threshold: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("random draw for {0} stayed degenerate after the retry budget")]
    RetriesExhausted(&'static str),

    #[error("chart vector nearly orthogonal to an eigenvector of block {block}")]
    ChartDegenerate { block: usize },

    #[error("start point {index:?} has residual {residual:e}")]
    StartResidual { index: Vec<usize>, residual: f64 },

    #[error("delta oracle not applicable: {0}")]
    OracleDeclined(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::DegeneratePencil(_) => "degenerate_pencil",
            Error::NoNullVector { .. } => "no_null_vector",
            Error::NoConvergence(_) => "no_convergence",
            Error::RetriesExhausted(_) => "retries_exhausted",
            Error::ChartDegenerate { .. } => "chart_degenerate",
            Error::StartResidual { .. } => "start_residual",
            Error::OracleDeclined(_) => "oracle_declined",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
