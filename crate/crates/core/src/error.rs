use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes shared by the library and the command line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("no parallax information: a = {a:e} is below the floor {floor:e}")]
    NoParallaxInformation { a: f64, floor: f64 },

    #[error("point behind camera: depth {depth} is not positive")]
    BehindCamera { depth: f64 },

    #[error("condition of existence violated: depth {depth} must exceed c = {c} (z_V * z + t_z > 0)")]
    Existence { depth: f64, c: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty evaluation: no valid pixels")]
    EmptyEvaluation,

    #[error("cannot normalize sparsification curve: metric on the full set is {0}")]
    Normalization(f64),

    #[error("degenerate setup: {0}")]
    DegenerateSetup(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Short stable identifier of the failure class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::NoParallaxInformation { .. } => "no-parallax-information",
            Error::BehindCamera { .. } => "behind-camera",
            Error::Existence { .. } => "condition-of-existence",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::EmptyEvaluation => "empty-evaluation",
            Error::Normalization(_) => "normalization",
            Error::DegenerateSetup(_) => "degenerate-setup",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit status: 2 for input problems, 3 for numeric/domain failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ShapeMismatch(_) | Error::Format(_) | Error::Config(_) | Error::Io { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
