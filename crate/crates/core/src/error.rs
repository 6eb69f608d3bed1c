use std::path::PathBuf;

/// Error type shared by the whole toolkit.
///
/// Variants are grouped by what went wrong rather than by module, so the
/// CLI can map them onto its exit-code contract (usage / data / run).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("model spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("training failed: {0}")]
    Train(String),

    #[error("decoding failed: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad or missing input data, as opposed to
    /// failures of a training or decoding run itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::EmptyCorpus(_)
                | Error::Parse { .. }
                | Error::VocabMismatch(_)
                | Error::SpecMismatch(_)
                | Error::DimMismatch(_)
                | Error::InvalidArg(_)
        )
    }
}
