//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("solver did not converge: residual {residual:.3e} after {sweeps} sweeps (target {target:.3e})")]
    SolverDiverged {
        residual: f64,
        target: f64,
        sweeps: usize,
        /// Max residual recorded at each convergence check.
        history: Vec<f64>,
    },

    #[error("point ({0:?}) is outside the solved domain")]
    OutsideDomain([f64; 3]),

    #[error("point ({point:?}) lies inside electrode '{electrode}'")]
    InsideElectrode { point: [f64; 3], electrode: String },

    #[error("voltage vector has {got} entries, domain has {expected} electrodes")]
    VoltageCount { got: usize, expected: usize },

    #[error("unknown electrode group '{0}'")]
    UnknownGroup(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("basis cache: {0}")]
    Cache(String),

    #[error("basis cache geometry hash mismatch: file {file}, domain {domain}")]
    StaleCache { file: String, domain: String },

    #[error("imaging: {0}")]
    Imaging(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::SolverDiverged { .. } => "solver-diverged",
            Error::OutsideDomain(_) => "outside-domain",
            Error::InsideElectrode { .. } => "inside-electrode",
            Error::VoltageCount { .. } => "voltage-count",
            Error::UnknownGroup(_) => "unknown-group",
            Error::Trace(_) => "trace",
            Error::Cache(_) => "cache",
            Error::StaleCache { .. } => "stale-cache",
            Error::Imaging(_) => "imaging",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
