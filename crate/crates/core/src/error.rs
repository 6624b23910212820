use thiserror::Error;

use crate::recon2d::ReconResult;

pub type Result<T, E = AetError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AetError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-d grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relative error undefined: reference norm is zero")]
    ZeroNorm,

    #[error("invalid conductivity: {0}")]
    Conductivity(String),

    #[error(
        "solver did not reach tolerance {tol:.1e}: residual {residual:.3e} after {iterations} iterations"
    )]
    NotConverged {
        tol: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid phantom: {0}")]
    Phantom(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("probe cell (transducer {transducer}, radius index {radius}): {source}")]
    ProbeCell {
        transducer: usize,
        radius: usize,
        #[source]
        source: Box<AetError>,
    },

    #[error("currents are nearly parallel on {fraction:.2}% of the reconstruction mask")]
    ParallelCurrents { fraction: f64 },

    #[error("missing perturbation component {0} for the requested mode")]
    MissingComponent(&'static str),

    #[error("reconstruction failed at iteration {iteration}: {source}")]
    Reconstruction {
        iteration: usize,
        partial: Box<ReconResult>,
        #[source]
        source: Box<AetError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
