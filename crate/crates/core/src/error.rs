use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("document {id} has no tokens left after preprocessing")]
    EmptyDocument { id: String },

    #[error("no documents survived preprocessing under {root}")]
    EmptyCorpus { root: PathBuf },

    #[error("label {0:?} is not one of the dataset categories")]
    UnknownLabel(String),

    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("document {id} has {found} in-vocabulary tokens, at least 2 are required")]
    TooShort { id: String, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("no document in the dataset could be encoded")]
    NoEncodableDocuments,

    #[error("degenerate denominator in {layer} layer at neuron {neuron}")]
    DegenerateDenominator { layer: &'static str, neuron: usize },

    #[error("forward trace does not match the model: {0}")]
    TraceMismatch(String),

    #[error("position {position} is out of range for a document of {len} words")]
    OutOfRange { position: usize, len: usize },

    #[error("deletion population is empty: {0}")]
    EmptyPopulation(String),

    #[error("deletion horizon {k} exceeds the shortest document ({min_len} words)")]
    HorizonTooLong { k: usize, min_len: usize },

    #[error("PCA input is degenerate: {0}")]
    DegenerateData(String),

    #[error("{tokens} tokens but {relevances} relevances")]
    LengthMismatch { tokens: usize, relevances: usize },

    #[error("nothing to render")]
    EmptyInput,

    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("model file is inconsistent: {0}")]
    InvalidModel(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("unknown document id {0:?}")]
    UnknownDocument(String),

    #[error("unknown class {0:?}")]
    UnknownClass(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidHyperparams(_) | Error::UnknownClass(_) | Error::UnknownDocument(_) => 1,
            Error::DegenerateDenominator { .. } | Error::DegenerateData(_) | Error::TraceMismatch(_) => 3,
            _ => 2,
        }
    }
}
