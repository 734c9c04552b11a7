use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "CFL violation: dt = {dt} exceeds {limit:.6e} (max characteristic speed {max_speed:.6}, dx = {dx})"
    )]
    Cfl {
        dt: f64,
        dx: f64,
        max_speed: f64,
        limit: f64,
    },

    #[error(
        "relaxation stability violation: dt = {dt} exceeds 0.5 * eps^2 * tau_min = {limit:.6e}"
    )]
    RelaxationStability { dt: f64, limit: f64 },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("non-positive {what} = {value} at omega = {omega}")]
    NonPositive {
        what: &'static str,
        omega: f64,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in solution at time step {step}")]
    NonFinite { step: usize },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("invalid optimizer setting: {0}")]
    InvalidOptimizer(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Cfl { .. } => "cfl",
            Error::RelaxationStability { .. } => "relaxation_stability",
            Error::InvalidMaterial(_) => "invalid_material",
            Error::NonPositive { .. } => "non_positive",
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidExperiment(_) => "invalid_experiment",
            Error::InvalidOptimizer(_) => "invalid_optimizer",
            Error::Eigen(_) => "eigen",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }
}
