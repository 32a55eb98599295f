use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The CLI maps these onto exit codes: [`Error::Config`] and
/// [`Error::InvalidInput`] are usage errors (exit 1), everything else is a
/// data error (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("record {index} has no label")]
    UnlabeledRecord { index: usize },

    #[error("record {index} has no flow identifiers; attribution requires srcip/sport/dstip/dsport/proto")]
    MissingFlowKey { index: usize },

    #[error("unknown feature: {0}")]
    UnknownFeature(String),

    #[error("feature {0} is not covered by the discretization map")]
    UncoveredFeature(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
