use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LoewnerError, StateSpaceRealization};
use crate::linalg::{generalized_eig, to_complex};
use crate::next::FrfDomain;
use crate::C64;

/// Poles with `Im(s) <= IMAG_TOL * |s|` count as real.
const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Loewner,
    Era,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub freq_hz: f64,
    pub zeta: f64,
    /// Unit maximum entry, that entry real and positive.
    pub shape: Vec<C64>,
    /// Continuous-time pole, rad/s.
    pub pole: C64,
}

impl Mode {
    pub fn from_pole(pole: C64, shape: Vec<C64>) -> Mode {
        let wn = pole.norm();
        Mode {
            freq_hz: wn / (2.0 * std::f64::consts::PI),
            zeta: -pole.re / wn,
            shape,
            pole,
        }
    }
}

/// Modes identified at one model order, ascending in frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalSet {
    pub modes: Vec<Mode>,
    pub order: usize,
    pub method: Method,
    /// Upper-half-plane stable poles dropped for lying outside the band.
    pub discarded: usize,
}

/// Scales a shape so that its largest-magnitude entry is `1 + 0i`.
pub fn normalize_shape(v: &[C64]) -> Vec<C64> {
    let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return vec![];
    };
    if big.norm() == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|z| z / big).collect()
}

/// Turns eigenpairs of a realization into modes: maps to the s-plane, keeps
/// stable underdamped poles with positive imaginary part inside `band`.
pub(crate) fn modes_from_eigenpairs(
    values: &[C64],
    vectors: &DMatrix<C64>,
    c: &DMatrix<C64>,
    domain: FrfDomain,
    band: [f64; 2],
    order: usize,
    method: Method,
) -> ModalSet {
    let mut modes = Vec::new();
    let mut discarded = 0;
    for (i, &lam) in values.iter().enumerate() {
        if let FrfDomain::DiscreteZ { .. } = domain {
            let nyquist_real = lam.im.abs() <= IMAG_TOL * lam.norm() && lam.re < 0.0;
            if lam.norm() == 0.0 || nyquist_real {
                continue;
            }
        }
        let s = domain.to_laplace(lam);
        if !(s.im > IMAG_TOL * s.norm()) || !(s.re < 0.0) {
            continue;
        }
        let x: DVector<C64> = vectors.column(i).into_owned();
        let phi: Vec<C64> = (c * x).iter().copied().collect();
        let mode = Mode::from_pole(s, normalize_shape(&phi));
        if mode.freq_hz >= band[0] && mode.freq_hz <= band[1] {
            modes.push(mode);
        } else {
            discarded += 1;
        }
    }
    modes.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    ModalSet {
        modes,
        order,
        method,
        discarded,
    }
}

/// Generalized eigenanalysis of `(A, E)`; one mode per stable upper-half-plane
/// pole in `band` (Hz).
pub fn extract_modes(real: &StateSpaceRealization, band: [f64; 2]) -> Result<ModalSet, LoewnerError> {
    let eig = generalized_eig(&to_complex(&real.a), &to_complex(&real.e))?;
    Ok(modes_from_eigenpairs(
        &eig.values,
        &eig.vectors,
        &to_complex(&real.c),
        real.domain,
        band,
        real.order,
        Method::Loewner,
    ))
}
