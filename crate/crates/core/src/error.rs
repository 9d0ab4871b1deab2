use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("no rows in {0}")]
    NoRows(PathBuf),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("duplicate column header {0:?}")]
    DuplicateHeader(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("column {0:?} cannot be imputed (target or id column)")]
    NotImputable(String),

    #[error("cannot estimate center for column {0:?}: no nonzero values")]
    CannotEstimateCenter(String),

    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("rotation angle {0} outside [0, pi]")]
    AngleOutOfRange(f64),

    #[error("degenerate angle for row {row}: real part of rotated state vanishes")]
    DegenerateAngle { row: usize },

    #[error("missing statistics record for row {row}, column {column:?}")]
    MissingStats { row: u64, column: String },

    #[error("insufficient distinct minima: found {found} separated finite-cost angles, need 3")]
    InsufficientMinima { found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Optimization,
}

impl Error {
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::Config(_) => ErrorClass::Config,
            Error::InsufficientMinima { .. } => ErrorClass::Optimization,
            _ => ErrorClass::Data,
        }
    }
}
