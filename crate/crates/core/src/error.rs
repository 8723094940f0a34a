use std::path::PathBuf;

use thiserror::Error;

use crate::providers::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),

    #[error("source and target language are both `{0}`")]
    SameLanguage(String),

    #[error("empty text")]
    EmptyText,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("feature schema mismatch: params are v{params}, extractor is v{extractor}")]
    SchemaMismatch { params: u32, extractor: u32 },

    #[error("rubric `{rubric}` is not covered for language `{lang}`")]
    UncoveredLanguage { rubric: String, lang: String },

    #[error("reward params were trained under rubric {trained}, current rubric is {current}; retrain required")]
    RetrainRequired { trained: String, current: String },

    #[error("training diverged at epoch {epoch}: loss {loss} exceeds 10x initial {initial}")]
    Diverged { epoch: usize, loss: f64, initial: f64 },

    #[error("no route from {src} to {tgt}: missing model {missing}")]
    NoRoute {
        src: String,
        tgt: String,
        missing: String,
    },

    #[error("language `{lang}` has only {chars} sample characters (need {needed})")]
    InsufficientSample {
        lang: String,
        chars: usize,
        needed: usize,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// A corpus-file problem tied to a 1-based line number.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("read failure: {0}")]
    Io(String),
}
