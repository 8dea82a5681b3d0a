use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Convergence,
}

/// Errors raised while parsing a track file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackFileError {
    #[error("line {line}: expected four non-negative integers \"L B E P\", got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: label 0 is reserved for background")]
    ZeroLabel { line: usize },
    #[error("line {line}: track {label} begins at frame {begin} after it ends at {end}")]
    InvertedSpan {
        line: usize,
        label: u32,
        begin: u32,
        end: u32,
    },
    #[error("line {line}: duplicate track label {label}")]
    DuplicateLabel { line: usize, label: u32 },
    #[error("line {line}: track {label} references unknown parent {parent}")]
    UnknownParent {
        line: usize,
        label: u32,
        parent: u32,
    },
    #[error("track {label} is part of a parent cycle")]
    Cycle { label: u32 },
}

/// Errors raised by raster readers and writers.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: cannot decode PNG: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}: cannot encode PNG: {reason}")]
    Encode { path: PathBuf, reason: String },
    #[error("{path}: expected {expected}, found {found}")]
    WrongFormat {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Errors raised by the gamma maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {required} strictly positive samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("sample {index} is not a finite non-negative number")]
    InvalidSample { index: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error(transparent)]
    TrackFile(#[from] TrackFileError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("overlap resolution did not converge after {iterations} iterations ({overlapping} pairs still overlap)")]
    Overcrowded {
        iterations: usize,
        overlapping: usize,
    },
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. } | Error::TrackFile(_) | Error::Fit(_) => ErrorKind::Validation,
            Error::Image(ImageError::Io { .. }) | Error::Io { .. } => ErrorKind::Io,
            Error::Image(ImageError::Decode { .. } | ImageError::Encode { .. }) => ErrorKind::Io,
            Error::Image(_) => ErrorKind::Validation,
            Error::Overcrowded { .. } => ErrorKind::Convergence,
        }
    }
}
