use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parameter `{name}` = {value} outside [{min}, {max}] for {context}")]
    ParameterRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
        context: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate feature column {index} (`{name}`): zero variance")]
    DegenerateFeature { index: usize, name: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{requested} qubits exceeds the simulator cap of {cap}")]
    QubitCap { requested: usize, cap: usize },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("missing inputs: {}", .0.join(", "))]
    MissingInput(Vec<String>),

    #[error("refusing to ingest a report as report input: {}", .0.display())]
    RecursiveReport(PathBuf),

    #[error("malformed input {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ParameterRange { .. } => "parameter_range",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::DegenerateFeature { .. } => "degenerate_feature",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::QubitCap { .. } => "qubit_cap",
            Error::SingleClass => "single_class",
            Error::Calibration(_) => "calibration",
            Error::MissingInput(_) => "missing_input",
            Error::RecursiveReport(_) => "recursive_report",
            Error::Malformed { .. } => "malformed",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
