//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field violates its contract.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A state vector failed the normalization contract.
    #[error("state not normalized: |alpha|^2 + |beta|^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    /// An oscillator position exceeded the unit amplitude bound.
    #[error("oscillator position {position} outside [-1, 1]")]
    PositionOutOfRange { position: f64 },

    /// A time series or spectrum was empty where data is required.
    #[error("empty {0}")]
    Empty(&'static str),

    /// Spectra with different frequency grids cannot be combined.
    #[error("mismatched spectral grids: {0}")]
    GridMismatch(String),

    /// The lineshape fit was handed unusable data.
    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),

    /// A sample window selects no data.
    #[error("empty window: {0}")]
    EmptyWindow(String),

    /// Not enough rows for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Model and dataset pressure ranges do not overlap.
    #[error("no overlap between model and dataset pressures")]
    NoOverlap,

    /// A file could not be parsed into the expected schema.
    #[error("schema error in {path}: {detail}")]
    Schema { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
