use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("parse error on line {line}: {message}")]
    ParseLine { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown object id `{0}`")]
    Lookup(String),

    #[error("invalid parameters: {0}")]
    Param(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("candidate set is empty")]
    EmptySet,

    #[error("out of range: {0}")]
    Range(String),

    #[error("unsupported format `{0}`")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
