use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::guides::GuideKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes; the CLI maps each to a distinct exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Validation,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Validation => 4,
            ErrorCategory::Numeric => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Io => "io",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: file not found", path.display())]
    MissingFile { path: PathBuf },

    #[error("{}: unsupported format: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{}: corrupt data: {reason}", path.display())]
    CorruptData { path: PathBuf, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty guide set")]
    EmptyGuideSet,

    #[error("guide count mismatch: exemplar side has {exemplar}, target side has {target}")]
    GuideCountMismatch { exemplar: usize, target: usize },

    #[error("guide kind mismatch at index {index}: {exemplar} vs {target}")]
    GuideKindMismatch {
        index: usize,
        exemplar: GuideKind,
        target: GuideKind,
    },

    #[error("guide weight mismatch at index {index}: {exemplar} vs {target}")]
    GuideWeightMismatch {
        index: usize,
        exemplar: f32,
        target: f32,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{width}x{height} image is below the minimum level size {min}")]
    BelowMinLevelSize {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("no covered pixels in the entire sequence")]
    NoCoverage,

    #[error("unmapped color id {id} at pixel ({x}, {y})")]
    UnmappedColorId { id: u32, x: usize, y: usize },

    #[error("frame {frame}: missing {pass} file {}", path.display())]
    MissingFrame {
        frame: i64,
        pass: String,
        path: PathBuf,
    },

    #[error("layer `{layer}` requires a {pass} pass")]
    MissingLayerPass { layer: String, pass: String },

    #[error("exemplar-side inputs changed between frames {first} and {frame}")]
    ExemplarChanged { first: i64, frame: i64 },

    #[error("fewer than two frames")]
    TooFewFrames,

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::MissingFile { .. }
            | Error::UnsupportedFormat { .. }
            | Error::CorruptData { .. }
            | Error::Io { .. }
            | Error::MissingFrame { .. } => ErrorCategory::Io,
            Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Config(_) => ErrorCategory::Config,
            _ => ErrorCategory::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }
}

/// Problems found while reading or validating a shot configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}:{line}:{column}: syntax error: {message}", path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: missing required key `{key}`", path.display())]
    MissingKey { path: PathBuf, key: String },

    #[error("{}: unknown key `{key}`", path.display())]
    UnknownKey { path: PathBuf, key: String },

    #[error("{}: invalid value: {message}", path.display())]
    InvalidValue { path: PathBuf, message: String },

    #[error("{}: cannot resolve `{}`", path.display(), referenced.display())]
    UnresolvablePath { path: PathBuf, referenced: PathBuf },

    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}
