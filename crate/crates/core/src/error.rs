use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("untrained network: the rule base is empty")]
    Untrained,

    #[error("numerical degeneracy: all firing strengths vanished at input {input:?}")]
    Degenerate { input: Vec<f64> },

    #[error("empty Gaussian mixture: bootstrap the first rule directly")]
    EmptyMixture,

    #[error("dimension mismatch at sample {index}: expected {expected}, got {got}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("empty training stream")]
    EmptyStream,

    #[error("rank-deficient regressor matrix; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("cannot perturb constant input '{0}'")]
    ConstantInput(String),

    #[error("missing derivative series: {0:?}")]
    MissingSeries(Vec<String>),

    #[error("incomplete table; missing cells: {0:?}")]
    IncompleteTable(Vec<String>),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("schema error: missing column '{0}'")]
    MissingColumn(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
