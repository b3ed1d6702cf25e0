use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter norm {norm} exceeds bound {bound}")]
    OutOfBounds { norm: f64, bound: f64 },

    #[error("invalid price range [{min}, {max}]")]
    InvalidPriceRange { min: f64, max: f64 },

    #[error("bernoulli demand needs a mean in [0, 1], got {0}")]
    BernoulliMean(f64),

    #[error("quasi-likelihood undefined: demand {demand} outside the range of the link")]
    DemandOutsideLinkRange { demand: f64 },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("covariate file {path}: {message}")]
    CovariateFile { path: String, message: String },

    #[error("covariate file {path}, row {row}, column {column}: {message}")]
    CovariateParse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("insufficient rows: need {needed}, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("{path}, row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("audit precondition violated: {0}")]
    AuditPrecondition(String),

    #[error("trial {trial} failed at t = {t}: {source}")]
    Trial {
        trial: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
