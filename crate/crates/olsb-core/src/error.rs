//! Error types shared across the simulator.

use thiserror::Error;

/// Errors produced by configuration loading, topology construction, and
/// simulation setup.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation. `field` is a dotted path
    /// into the config document, e.g. `links[3].dst`.
    #[error("invalid config at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Topology file or grid spec is inconsistent (self-loop, duplicate
    /// link, out-of-range coordinate).
    #[error("topology error: {0}")]
    Topology(String),

    /// A queue operation violated the budget-tightening rule.
    #[error("budget violation: packet at level {packet_level} enqueued at level {requested}")]
    BudgetViolation { packet_level: usize, requested: usize },

    /// A path id was not found in the learner's spanner.
    #[error("unknown path id {0}")]
    UnknownPath(usize),

    /// A cost sample fell outside `[0, 1]`.
    #[error("cost sample {0} outside [0, 1]")]
    CostOutOfRange(f64),

    /// A learner was asked to operate before initialization completed.
    #[error("initialization error: {0}")]
    Init(String),

    /// A vector is outside the span of a spanner's basis.
    #[error("vector outside spanner span (residual {residual:.3e})")]
    OutsideSpan { residual: f64 },

    /// Flow has no usable path or an empty spanner.
    #[error("flow {flow} has no path from source to destination")]
    NoPath { flow: usize },

    /// IO error while reading or writing artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
