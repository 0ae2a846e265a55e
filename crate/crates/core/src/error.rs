use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer `{layer}`: {reason}")]
    InvalidLayer { layer: String, reason: String },

    #[error("invalid multiplex: {0}")]
    InvalidMultiplex(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// A node has zero strength, so `S^{-1/2}` is undefined.
    #[error("zero strength at node {node}")]
    ZeroStrength { node: String },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("every grid evaluation of the total distance failed; first error: {0}")]
    NoFeasibleOmega(Box<Error>),

    #[error("insufficient overlap: {got} paired observations, need at least {need}")]
    InsufficientOverlap { got: usize, need: usize },

    #[error("constant series: correlation undefined")]
    ConstantSeries,

    #[error("correlation {0} outside [-1, 1]")]
    CorrelationDomain(f64),

    #[error("fewer than two usable entities in `{0}`")]
    TooFewEntities(String),

    #[error("no entity is shared by all layers")]
    EmptyIntersection,

    #[error("partitions cover different node sets: {0}")]
    NodeSetMismatch(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short snake_case tag for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidLayer { .. } => "invalid_layer",
            Error::InvalidMultiplex(_) => "invalid_multiplex",
            Error::OutOfRange(_) => "out_of_range",
            Error::ZeroStrength { .. } => "zero_strength",
            Error::NonFinite { .. } => "non_finite",
            Error::EigenFailure => "eigen_failure",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NoFeasibleOmega(_) => "no_feasible_omega",
            Error::InsufficientOverlap { .. } => "insufficient_overlap",
            Error::ConstantSeries => "constant_series",
            Error::CorrelationDomain(_) => "correlation_domain",
            Error::TooFewEntities(_) => "too_few_entities",
            Error::EmptyIntersection => "empty_intersection",
            Error::NodeSetMismatch(_) => "node_set_mismatch",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
