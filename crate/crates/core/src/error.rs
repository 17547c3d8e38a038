//! Crate wide error type.

use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between parsing a metric file and writing a
/// report.
///
/// Variants are grouped by origin: input/definition problems (bad files,
/// unknown names, malformed expressions) versus numeric failures discovered
/// while evaluating (domain errors, degenerate metrics, order exhaustion).
/// The CLI maps the former to exit code 2 and the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unknown variable `{name}` (expected one of: {expected})")]
    UnknownVariable { name: String, expected: String },

    #[error("unknown function `{name}`")]
    UnknownFunction { name: String },

    #[error("metric file field `{field}`: {msg}")]
    MetricFile { field: String, msg: String },

    #[error("homogeneity check failed: {what} scales with degree {observed:.6} instead of {expected} (relative deviation {deviation:.3e})")]
    Homogeneity { what: String, expected: f64, observed: f64, deviation: f64 },

    #[error("unknown gallery metric `{0}`")]
    UnknownGallery(String),

    #[error("unknown tensor symbol `{0}`")]
    UnknownTensor(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("unsupported dimension {dim}: {msg}")]
    UnsupportedDimension { dim: usize, msg: String },

    #[error("operation `{op}` needs an (alpha,beta) metric, got kind `{kind}`")]
    NotAlphaBeta { op: String, kind: String },

    #[error("hypothesis violated for `{op}`: {detail}")]
    HypothesisViolated { op: String, detail: String },

    #[error("domain error: {func}({value}) undefined")]
    Domain { func: &'static str, value: f64 },

    #[error("jet config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("derivative order {requested} exceeds jet validity: required order {required}, available {available}")]
    InsufficientOrder { requested: usize, required: usize, available: usize },

    #[error("matrix not positive definite (pivot {pivot:.3e} at step {step})")]
    NotPositiveDefinite { pivot: f64, step: usize },

    #[error("matrix singular or ill conditioned: {0}")]
    IllConditioned(String),

    #[error("Newton iteration failed to converge for direction {direction:?} (last residual {residual:.3e})")]
    NewtonDiverged { direction: Vec<f64>, residual: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user supplied definitions rather than by
    /// numerics discovered during evaluation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownVariable { .. }
                | Error::UnknownFunction { .. }
                | Error::MetricFile { .. }
                | Error::Homogeneity { .. }
                | Error::UnknownGallery(_)
                | Error::UnknownTensor(_)
                | Error::InvalidPoint(_)
                | Error::UnsupportedDimension { .. }
                | Error::NotAlphaBeta { .. }
                | Error::HypothesisViolated { .. }
                | Error::Io(_)
        )
    }
}
