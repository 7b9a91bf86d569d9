use std::path::PathBuf;

/// Errors produced anywhere in the decoding pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("inseparable states: {0}")]
    InseparableStates(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("classification error dominates edge {edge}: c = {c}")]
    ClassificationDominates { edge: usize, c: f64 },

    #[error("disconnected defect: {0}")]
    DisconnectedDefect(String),

    #[error("soft decoding requires IQ data")]
    MissingIq,

    #[error("dataset too small: {got} shots, need at least {need}")]
    DatasetTooSmall { got: usize, need: usize },

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// Deserialize JSON text, reporting the path of the first offending field.
pub fn from_json_str<T: serde::de::DeserializeOwned>(file: &std::path::Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Schema {
            path: format!("{}:{}", file.display(), field),
            message: e.into_inner().to_string(),
        }
    })
}
