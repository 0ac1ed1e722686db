use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum WiceError {
    #[error("no element tree could be recovered from the document")]
    MalformedDocument,
    #[error("page has no <img> element")]
    NoImage,
    #[error("main image has no alt text, caption or title")]
    NoReferenceText,
    #[error("page has no reference text")]
    MissingReference,
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("graph has no text nodes")]
    NoTextNodes,
    #[error("page has no <title>")]
    NoTitle,
    #[error("cannot embed an empty text")]
    EmptyText,
    #[error("embedding dimension must be at least {min}, got {got}")]
    InvalidDimension { min: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no cached embedding for text with hash {hash}")]
    MissingEmbedding { hash: String },
    #[error("embedding provider mismatch: expected {expected}, found {found}")]
    ProviderMismatch { expected: String, found: String },
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector contains a non-finite entry")]
    NonFiniteVector,
    #[error("non-finite gradient in parameter {param}{}", context.as_ref().map(|c| format!(" (page {c})")).unwrap_or_default())]
    NonFiniteGradient { param: String, context: Option<String> },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("series has zero variance")]
    DegenerateVariance,
    #[error("need at least {needed} pairs, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("page {page_id}: {source}")]
    Page { page_id: String, source: Box<WiceError> },
}

impl WiceError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        WiceError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        WiceError::Parse { path: path.into(), line, message: message.into() }
    }

    /// Attach a page id to an error raised while processing that page.
    pub fn for_page(self, page_id: &str) -> Self {
        match self {
            WiceError::NonFiniteGradient { param, .. } => {
                WiceError::NonFiniteGradient { param, context: Some(page_id.to_string()) }
            }
            err @ WiceError::Page { .. } => err,
            other => WiceError::Page { page_id: page_id.to_string(), source: Box::new(other) },
        }
    }

    /// Innermost error, looking through page context wrappers.
    pub fn root(&self) -> &WiceError {
        match self {
            WiceError::Page { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for numeric failures (non-finite values during optimisation).
    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), WiceError::NonFiniteGradient { .. } | WiceError::NonFiniteVector)
    }
}

pub type Result<T, E = WiceError> = std::result::Result<T, E>;
