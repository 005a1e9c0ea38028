use thiserror::Error;

use crate::grid::ManifoldGrid;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: ManifoldGrid, right: ManifoldGrid },

    #[error("non-finite value in {field} at grid point {index}")]
    NonFinite { field: &'static str, index: usize },

    /// The flow tensor left the conformal family.
    #[error(
        "unsupported tensor: h is not conformal at grid point {index} \
         (eigenvalue anisotropy {anisotropy:e})"
    )]
    UnsupportedTensor { index: usize, anisotropy: f64 },

    #[error("blowup at grid point {index}, t = {time}: {what}")]
    Blowup { index: usize, time: f64, what: String },

    #[error("stability bound violated: dt = {dt:e} exceeds bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty history")]
    EmptyHistory,
}

pub(crate) fn ensure_same_grid(left: &ManifoldGrid, right: &ManifoldGrid) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: *left,
            right: *right,
        })
    }
}
