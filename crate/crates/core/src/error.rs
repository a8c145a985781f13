use thiserror::Error;

pub type Result<T> = std::result::Result<T, BoostError>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column '{column}': missing value")]
    MissingCell { row: usize, column: String },
    #[error("column '{0}' not found")]
    MissingColumn(String),
    #[error("constant column '{0}'")]
    ConstantColumn(String),
    #[error("binary response required: column '{column}' holds {found} distinct labels, expected 2")]
    BinaryLabels { column: String, found: usize },
    #[error("binary response required")]
    BinaryRequired,
    #[error("survival response required")]
    SurvivalRequired,
    #[error("continuous response required")]
    ContinuousRequired,
    #[error("survival time must be > 0 (row {row}: {value})")]
    NonPositiveTime { row: usize, value: f64 },
    #[error("survival status must be 0 or 1 (row {row}: {value})")]
    BadStatus { row: usize, value: f64 },
    #[error("no events in survival response")]
    NoEvents,
    #[error("only one class present in binary response")]
    SingleClass,
    #[error("response values incompatible with family {family}: {reason}")]
    IncompatibleResponse { family: String, reason: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resampling: {0}")]
    Resampling(String),
    #[error("target df {target} outside feasible range ({lower}, {upper})")]
    DfOutOfRange { target: f64, lower: f64, upper: f64 },
    #[error("no fittable base-learner")]
    NoFittableLearner,
    #[error("singular system: {0}")]
    Singular(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("model contains spline increments; use partial effects for component '{0}'")]
    NonLinearModel(String),
    #[error("iteration {requested} out of range 0..={max}")]
    IterationOutOfRange { requested: usize, max: usize },
    #[error("model has no rounds")]
    EmptyModel,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

impl BoostError {
    pub fn kind(&self) -> ErrorKind {
        use BoostError::*;
        match self {
            InvalidArgument(_) | IterationOutOfRange { .. } | DfOutOfRange { .. } | Unsupported(_) => {
                ErrorKind::Argument
            }
            Singular(_) | Numeric(_) | NoFittableLearner => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
