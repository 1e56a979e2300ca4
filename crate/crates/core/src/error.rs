use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("no rows")]
    NoRows,
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric value {value:?} in ordered column {column:?}")]
    NonNumeric {
        column: String,
        line: usize,
        value: String,
    },
    #[error("unknown class label {0:?}")]
    UnknownClass(String),
    #[error("unknown level {label:?} in categorical column {column:?}")]
    UnknownCategory { column: String, label: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("node statistics have zero total weight")]
    ZeroTotal,
    #[error("split leaves an empty child")]
    EmptyChild,
    #[error("transfer would drive right-hand statistics negative")]
    NegativeTransfer,
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("feature {0} is ordered; a categorical feature is required")]
    OrderedFeature(usize),
    #[error("feature {0} was already used on this branch")]
    FeatureAlreadyUsed(usize),
    #[error("categorical code {code} of feature {feature} exceeds cardinality {cardinality}")]
    CategoryOutOfRange {
        feature: usize,
        code: f64,
        cardinality: usize,
    },
    #[error("input has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("out-of-bag estimate undefined: forest was fit without row sampling")]
    OobUndefined,
    #[error("no sample is out-of-bag for any tree")]
    NoOobCoverage,
    #[error("{p} variables exceeds the analytic limit of {limit}")]
    TooManyVariables { p: usize, limit: usize },
    #[error("depth/subspace size {q} out of range 1..={p}")]
    DepthOutOfRange { q: usize, p: usize },
    #[error("model format error: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    /// True for errors caused by input data rather than by a model document.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::NoRows
                | Error::RaggedRow { .. }
                | Error::NonNumeric { .. }
                | Error::UnknownClass(_)
                | Error::UnknownCategory { .. }
                | Error::MissingColumn(_)
                | Error::InvalidDataset(_)
                | Error::CategoryOutOfRange { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}
