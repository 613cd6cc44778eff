use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("spectral data required for the Z0 kernel")]
    MissingSpectralData,

    #[error("quadrature did not converge (estimated residual {residual:e})")]
    Quadrature { residual: f64 },

    #[error("no sign change of the shooting functional on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("eigenvalue solvers disagree: shooting {shooting}, matrix {matrix} (relative {relative:e})")]
    Consistency {
        shooting: f64,
        matrix: f64,
        relative: f64,
    },

    #[error("requested {what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("fit quality: {0}")]
    FitQuality(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("overlapping bubbles: {0}")]
    Overlap(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}
