use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LoewnerError, LoewnerPencil, RealPencil};
use crate::linalg::{dominant_real_basis, numerical_rank, to_complex};
use crate::next::{FrequencyResponseSet, FrfDomain, Provenance};
use crate::C64;

/// Singular values below this fraction of the largest do not count toward rank.
pub const RANK_TOL: f64 = 1e-12;

/// Which left sample supplies the shift in `ζ𝕃 - 𝕃s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    FirstSample,
    /// Left sample with the largest frequency magnitude.
    #[default]
    MaxMagnitude,
}

/// SVD of the shifted pencil `ζ𝕃 - 𝕃s` (in real form), computed once and
/// truncated to any order.
#[derive(Debug, Clone)]
pub struct TruncatedPencilFactors {
    /// Left singular vectors, `v x min(v, ρ)`.
    pub y: DMatrix<C64>,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `ρ x min(v, ρ)`.
    pub x: DMatrix<C64>,
    pub shift: C64,
    pub policy: ShiftPolicy,
    pub real: RealPencil,
    pub domain: FrfDomain,
}

/// Descriptor realization `H(s) = C (sE - A)^-1 B` with real matrices.
///
/// In the discrete domain the realized function is `z^-1 F(z)`, so the
/// response is `z C (zE - A)^-1 B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceRealization {
    #[serde(with = "crate::json::matrix")]
    pub e: DMatrix<f64>,
    #[serde(with = "crate::json::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::json::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::json::matrix")]
    pub c: DMatrix<f64>,
    pub order: usize,
    pub domain: FrfDomain,
    pub shift: Option<[f64; 2]>,
    pub shift_policy: Option<ShiftPolicy>,
}

impl TruncatedPencilFactors {
    pub fn new(pencil: &LoewnerPencil, policy: ShiftPolicy) -> Self {
        let data = &pencil.data;
        let idx = match policy {
            ShiftPolicy::FirstSample => 0,
            ShiftPolicy::MaxMagnitude => {
                let mut best = 0;
                for (j, f) in data.left_freqs.iter().enumerate() {
                    if f.abs() > data.left_freqs[best].abs() {
                        best = j;
                    }
                }
                best
            }
        };
        let shift = data.mu[idx];
        let real = pencil.real_form();
        let shifted = to_complex(&real.ll) * shift - to_complex(&real.lls);
        let svd = shifted.svd(true, true);
        let y = svd.u.expect("requested U");
        let x = svd.v_t.expect("requested V^H").adjoint();
        let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        // nalgebra sorts, but keep the invariant explicit.
        debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        sigma.iter_mut().for_each(|s| *s = s.max(0.0));
        TruncatedPencilFactors {
            y,
            sigma,
            x,
            shift,
            policy,
            real,
            domain: data.domain,
        }
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma, RANK_TOL)
    }

    /// Ratio of the last retained to the first discarded singular value at
    /// the numerical rank.
    pub fn rank_gap(&self) -> f64 {
        let r = self.rank();
        match (r, self.sigma.get(r)) {
            (0, _) => 0.0,
            (_, Some(&next)) if next > 0.0 => self.sigma[r - 1] / next,
            _ => f64::INFINITY,
        }
    }

    pub fn realize(&self, k: usize) -> Result<StateSpaceRealization, LoewnerError> {
        let rank = self.rank();
        if k == 0 || k > rank {
            return Err(LoewnerError::OrderExceedsRank {
                k,
                rank,
                gap: self.rank_gap(),
            });
        }
        let xr = dominant_real_basis(&self.x.columns(0, k).into_owned(), k);
        let yr = dominant_real_basis(&self.y.columns(0, k).into_owned(), k);
        let yt = yr.transpose();
        let p = &self.real;
        Ok(StateSpaceRealization {
            e: -(&yt * &p.ll * &xr),
            a: -(&yt * &p.lls * &xr),
            b: &yt * &p.v,
            c: &p.w * &xr,
            order: k,
            domain: self.domain,
            shift: Some([self.shift.re, self.shift.im]),
            shift_policy: Some(self.policy),
        })
    }
}

/// Order-`k` realization of a pencil. For several orders on one pencil build
/// [`TruncatedPencilFactors`] once instead.
pub fn realize(pencil: &LoewnerPencil, k: usize, policy: ShiftPolicy) -> Result<StateSpaceRealization, LoewnerError> {
    TruncatedPencilFactors::new(pencil, policy).realize(k)
}

impl StateSpaceRealization {
    /// `true` if `det(A - λE) != 0` at some of three fixed probe points.
    pub fn is_regular(&self) -> bool {
        let scale = self.a.norm() / self.e.norm().max(f64::MIN_POSITIVE);
        let e = to_complex(&self.e);
        let a = to_complex(&self.a);
        [C64::new(0.31, 0.57), C64::new(-0.71, 1.41), C64::new(1.73, -0.27)]
            .iter()
            .any(|&z| {
                let m = &a - &e * (z * scale.max(1.0));
                let sv = m.singular_values();
                sv.is_empty() || sv[sv.len() - 1] > 1e-13 * sv[0]
            })
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
}

/// Frequency response of a realization on a grid.
pub fn evaluate_model(real: &StateSpaceRealization, freqs: &[f64]) -> Result<FrequencyResponseSet, LoewnerError> {
    let e = to_complex(&real.e);
    let a = to_complex(&real.a);
    let b = to_complex(&real.b);
    let c = to_complex(&real.c);
    let mut values = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let s = real.domain.point(f);
        let k = &e * s - &a;
        let sv = k.singular_values();
        let n = sv.len();
        if n > 0 && !(sv[n - 1] > 1e-13 * sv[0]) {
            return Err(LoewnerError::SingularAtFrequency(f));
        }
        let x = k.lu().solve(&b).ok_or(LoewnerError::SingularAtFrequency(f))?;
        let h = &c * x;
        values.push(match real.domain {
            FrfDomain::ContinuousLaplace => h,
            FrfDomain::DiscreteZ { .. } => h * s,
        });
    }
    Ok(FrequencyResponseSet {
        freqs: freqs.to_vec(),
        values,
        domain: real.domain,
        provenance: Provenance::Analytic,
    })
}
