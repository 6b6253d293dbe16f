use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown edge: {0}")]
    UnknownEdge(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("profile not in the weighted L1 space for minimal edge length {ell_min}")]
    NotInL1 { ell_min: f64 },

    #[error("truncation tolerance {requested:e} unreachable within {steps} steps (achieved bound {achieved:e})")]
    TruncationBudget {
        requested: f64,
        achieved: f64,
        steps: usize,
    },

    #[error("spectral parameter {lambda} is on the Dirichlet spectrum (|s(l)| = {s1:e})")]
    NearDirichlet { lambda: Complex64, s1: f64 },

    #[error("singular vertex system at z = {z}: condition number {cond:e}")]
    SingularVertexSystem { z: Complex64, cond: f64 },

    #[error("mesh width {h} exceeds {limit} (a quarter of the shortest edge)")]
    MeshTooCoarse { h: f64, limit: f64 },

    #[error("discretization has {n} unknowns, above the dense cap of {cap}")]
    TooManyUnknowns { n: usize, cap: usize },

    #[error("z = {z} lies within {dist:e} of a discrete eigenvalue")]
    NearEigenvalue { z: Complex64, dist: f64 },

    #[error("insufficient time grid: {0} points, at least 4 needed")]
    InsufficientGrid(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::UnknownEdge(_)
                | Error::Unsupported(_)
                | Error::MeshTooCoarse { .. }
                | Error::TooManyUnknowns { .. }
                | Error::InsufficientGrid(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
