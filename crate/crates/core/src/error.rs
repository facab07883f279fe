use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid axis `{name}`: {reason}")]
    InvalidAxis { name: String, reason: String },

    #[error("value count {got} does not match axis product {expected}")]
    CountMismatch { expected: usize, got: usize },

    #[error("expected a {expected}-dimensional field, got {got} axes")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid does not cover the phantom support: {0}")]
    GridTooSmall(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error(
        "data does not vanish on the hyperplane (max |F(x',0)| = {value:.3e} vs peak {peak:.3e})"
    )]
    VanishingOrderTooLow { value: f64, peak: f64 },

    #[error("reconstruction point has x_n = {0} <= 0")]
    NonPositiveXn(f64),

    #[error("periodic box too small: {0}")]
    BoxTooSmall(String),

    #[error("input energy near the box boundary is {fraction:.3e} of the total")]
    SupportLeak { fraction: f64 },

    #[error("Re(w) = {0} must be positive")]
    NonPositiveRealPart(f64),

    #[error("dimension n = {0} is not supported (even n = 2 only)")]
    UnsupportedDimension(usize),

    #[error("profile needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("axes are incompatible: {0}")]
    AxisMismatch(String),

    #[error("malformed field header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("payload checksum mismatch for {0}")]
    ChecksumMismatch(PathBuf),

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("missing input {0}; run the earlier stage first")]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
