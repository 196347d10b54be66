use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("degenerate tangent plane at (u={u}, v={v})")]
    DegenerateCurvature { u: f64, v: f64 },

    #[error("measurement coincides with the shape center")]
    CenterPoint,

    #[error("noise covariance is not positive definite")]
    SingularCovariance,

    #[error("shape does not enclose its local origin")]
    InvalidShape,

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("initialization needs at least {needed} points, got {got}")]
    InsufficientInitialization { needed: usize, got: usize },

    #[error("no records to aggregate")]
    EmptyReport,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short, stable identifier for the error kind, for machine consumption.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::InvalidKnots(_) => "invalid-knots",
            Error::DegenerateCurvature { .. } => "degenerate-curvature",
            Error::CenterPoint => "center-point",
            Error::SingularCovariance => "singular-covariance",
            Error::InvalidShape => "invalid-shape",
            Error::InvalidLayout(_) => "invalid-layout",
            Error::Numerical(_) => "numerical",
            Error::InsufficientInitialization { .. } => "insufficient-initialization",
            Error::EmptyReport => "empty-report",
            Error::Parse { .. } => "parse",
            Error::MissingColumn(_) => "missing-column",
            Error::InvalidScenario(_) => "invalid-scenario",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
