//! Tangential Loewner pencils, truncated descriptor realizations and modal
//! extraction.

mod data;
mod modes;
mod pencil;
mod realization;

pub use data::{partition_samples, Directions, InterpolationData};
pub use modes::{extract_modes, normalize_shape, Method, ModalSet, Mode};
pub(crate) use modes::modes_from_eigenpairs;
pub use pencil::{build_pencil, read_pencil_dump, sylvester_residuals, LoewnerPencil, RealPencil};
pub use realization::{evaluate_model, realize, ShiftPolicy, StateSpaceRealization, TruncatedPencilFactors, RANK_TOL};

use crate::linalg::LinalgError;

#[derive(Debug, thiserror::Error)]
pub enum LoewnerError {
    #[error("need at least 4 frequency bins, got {0}")]
    TooFewBins(usize),
    #[error("left point {left} coincides with right point {right}")]
    CoincidentPoints { left: usize, right: usize },
    #[error("order {k} exceeds numerical rank {rank} (singular value gap {gap:.3e})")]
    OrderExceedsRank { k: usize, rank: usize, gap: f64 },
    #[error("realization is singular at {0} Hz")]
    SingularAtFrequency(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
