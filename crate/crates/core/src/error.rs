use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped into three coarse classes by [`Error::class`], which the
/// command-line driver maps onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("requested rank {requested} exceeds numerical rank; largest admissible rank is {max_rank}")]
    RankDeficient { requested: usize, max_rank: usize },

    #[error("degenerate spectrum: all eigenvalues are zero")]
    DegenerateSpectrum,

    #[error("subspaces are on each other's cut locus (smallest cosine {min_cosine:e}){}", context.as_deref().map(|c| format!(" at {c}")).unwrap_or_default())]
    CutLocus {
        min_cosine: f64,
        context: Option<String>,
    },

    #[error("SVD of a {rows}×{cols} matrix did not converge")]
    SvdFailed { rows: usize, cols: usize },

    #[error("degenerate alignment: cross-Gramian vanishes")]
    DegenerateAlignment,

    #[error("undefined relative error: reference field has zero norm")]
    ZeroReference,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical instability at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_) | Error::Config(_) => ErrorClass::Validation,
            Error::Format { .. } | Error::Io { .. } => ErrorClass::Io,
            Error::RankDeficient { .. }
            | Error::DegenerateSpectrum
            | Error::CutLocus { .. }
            | Error::SvdFailed { .. }
            | Error::DegenerateAlignment
            | Error::ZeroReference
            | Error::Instability { .. } => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::Validation(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
