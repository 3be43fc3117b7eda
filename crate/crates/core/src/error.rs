use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or degenerate geometry (self-intersecting ring, too few
    /// vertices, zero area, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A caller-supplied parameter is out of range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Operation invoked on an entity that is missing required state
    /// (e.g. packing a section without an assigned pitch).
    #[error("invalid state: {0}")]
    State(String),

    /// A required property is missing or mistyped in an input file.
    #[error("schema error in feature {feature_id}: {message}")]
    Schema { feature_id: String, message: String },

    /// A cross-reference (e.g. section -> building) does not resolve.
    #[error("referential error: {0}")]
    Referential(String),

    /// Malformed input file (header mismatch, bad cell count, ...).
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    /// Weather series continuity violation (gap, duplicate, short year).
    #[error("continuity error: {0}")]
    Continuity(String),

    /// Numeric value outside its physical range.
    #[error("range error: {0}")]
    Range(String),

    /// Model training failed (degenerate data, too few rows).
    #[error("training error: {0}")]
    Training(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
