//! Model-order sweeps, stability flags, mode consolidation and MAC.

mod consolidate;
mod sweep;

pub use consolidate::{consolidate, mac_matrix, match_by_frequency, ConsolidatedMode, ConsolidatedModes, MacComparison, ShapeSet};
pub use sweep::{order_sweep, DiagramOrder, DiagramPole, Flag, ModalSource, SkippedOrder, StabilizationDiagram};

use serde::{Deserialize, Serialize};

use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum StabilizeError {
    #[error("empty order range [{0}, {1}]")]
    EmptyOrderRange(usize, usize),
    #[error("invalid criteria: {0}")]
    InvalidCriteria(String),
    #[error("MAC of a zero vector")]
    ZeroVector,
    #[error("shape lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityCriteria {
    /// Hz.
    pub f_band: [f64; 2],
    pub zeta_band: [f64; 2],
    pub freq_rel_tol: f64,
    pub damp_rel_tol: f64,
    pub mac_min: f64,
    pub consecutive: usize,
    /// Hz.
    #[serde(default)]
    pub freq_abs_tol: Option<f64>,
}

impl StabilityCriteria {
    /// Shaker-test settings: 0.5 % frequency, 5 % damping, MAC 0.95, five
    /// consecutive orders.
    pub fn xb2() -> Self {
        StabilityCriteria {
            f_band: [0.0, 83.0],
            zeta_band: [0.01, 0.03],
            freq_rel_tol: 0.005,
            damp_rel_tol: 0.05,
            mac_min: 0.95,
            consecutive: 5,
            freq_abs_tol: None,
        }
    }

    /// Ambient blade-test settings: adds a 0.1 Hz absolute frequency bound
    /// and needs three consecutive orders.
    pub fn h135() -> Self {
        StabilityCriteria {
            f_band: [0.0, 100.0],
            zeta_band: [0.003, 0.03],
            freq_rel_tol: 0.005,
            damp_rel_tol: 0.05,
            mac_min: 0.95,
            consecutive: 3,
            freq_abs_tol: Some(0.1),
        }
    }

    pub fn validate(&self) -> Result<(), StabilizeError> {
        let bad = |m: &str| Err(StabilizeError::InvalidCriteria(m.into()));
        if !(self.f_band[0] < self.f_band[1]) || !(self.zeta_band[0] < self.zeta_band[1]) {
            return bad("bands must be nonempty");
        }
        if !(self.freq_rel_tol > 0.0 && self.damp_rel_tol > 0.0 && self.mac_min > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.freq_abs_tol.is_some_and(|t| !(t > 0.0)) {
            return bad("absolute frequency tolerance must be positive");
        }
        if self.consecutive < 2 {
            return bad("consecutive must be at least 2");
        }
        Ok(())
    }

    pub fn in_bands(&self, freq_hz: f64, zeta: f64) -> bool {
        (self.f_band[0]..=self.f_band[1]).contains(&freq_hz) && (self.zeta_band[0]..=self.zeta_band[1]).contains(&zeta)
    }
}

/// `|aᴴb|² / ((aᴴa)(bᴴb))`.
pub fn mac(a: &[C64], b: &[C64]) -> Result<f64, StabilizeError> {
    if a.len() != b.len() {
        return Err(StabilizeError::LengthMismatch(a.len(), b.len()));
    }
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if a.is_empty() || na == 0.0 || nb == 0.0 {
        return Err(StabilizeError::ZeroVector);
    }
    let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((dot.norm_sqr() / (na * nb)).min(1.0))
}
