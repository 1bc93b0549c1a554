//! Eigensystem Realization Algorithm on correlation sequences.

use nalgebra::DMatrix;

use crate::linalg::{eig, numerical_rank, to_complex, LinalgError};
use crate::loewner::{modes_from_eigenpairs, Method, ModalSet};
use crate::next::{FrfDomain, IrfSet};

/// Largest default block count for either Hankel dimension.
pub const MAX_DEFAULT_BLOCKS: usize = 200;

const RANK_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum EraError {
    #[error("{rows} + {cols} + 1 Hankel blocks need more than the {lags} available lags")]
    HankelTooSmall { rows: usize, cols: usize, lags: usize },
    #[error("order {k} exceeds numerical rank {rank} of the Hankel matrix")]
    OrderExceedsRank { k: usize, rank: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Block Hankel matrices: block `(a, b)` of `h0` holds lag `a + b`, of `h1`
/// lag `a + b + 1`. Blocks are `p x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair {
    pub h0: DMatrix<f64>,
    pub h1: DMatrix<f64>,
    pub rows: usize,
    pub cols: usize,
    pub dt: f64,
}

/// `⌊(L - 1) / 2⌋` capped at [`MAX_DEFAULT_BLOCKS`].
pub fn default_blocks(lags: usize) -> usize {
    (lags.saturating_sub(1) / 2).min(MAX_DEFAULT_BLOCKS)
}

pub fn hankel_pair(irfs: &IrfSet, rows: usize, cols: usize) -> Result<HankelPair, EraError> {
    let lags = irfs.n_lags();
    if rows == 0 || cols == 0 || rows + cols + 1 > lags {
        return Err(EraError::HankelTooSmall { rows, cols, lags });
    }
    let (p, m) = (irfs.n_outputs(), irfs.n_references());
    let build = |shift: usize| {
        DMatrix::from_fn(p * rows, m * cols, |r, c| irfs.data[r % p][c % m][r / p + c / m + shift])
    };
    Ok(HankelPair {
        h0: build(0),
        h1: build(1),
        rows,
        cols,
        dt: irfs.dt,
    })
}

/// SVD of `H0` and the projected shifted Hankel, reusable across orders.
#[derive(Debug, Clone)]
pub struct EraModel {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    vt: DMatrix<f64>,
    /// `Uᵀ H1 V` over all retained singular directions.
    core: DMatrix<f64>,
    p: usize,
    m: usize,
    dt: f64,
}

/// Discrete-time realization `R[lag] = C A^lag B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub dt: f64,
}

impl DiscreteRealization {
    /// Markov parameter `C A^lag B`.
    pub fn markov(&self, lag: usize) -> DMatrix<f64> {
        let mut x = self.b.clone();
        for _ in 0..lag {
            x = &self.a * x;
        }
        &self.c * x
    }
}

impl EraModel {
    pub fn new(h: &HankelPair, p: usize, m: usize) -> EraModel {
        let svd = h.h0.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        let core = u.transpose() * &h.h1 * vt.transpose();
        EraModel {
            sigma: svd.singular_values.iter().copied().collect(),
            u,
            vt,
            core,
            p,
            m,
            dt: h.dt,
        }
    }

    pub fn from_irfs(irfs: &IrfSet, rows: usize, cols: usize) -> Result<EraModel, EraError> {
        let h = hankel_pair(irfs, rows, cols)?;
        Ok(EraModel::new(&h, irfs.n_outputs(), irfs.n_references()))
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma, RANK_TOL)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn realize(&self, k: usize) -> Result<DiscreteRealization, EraError> {
        let rank = self.rank();
        if k == 0 || k > rank {
            return Err(EraError::OrderExceedsRank { k, rank });
        }
        let s_half: Vec<f64> = self.sigma[..k].iter().map(|s| s.sqrt()).collect();
        let a = DMatrix::from_fn(k, k, |i, j| self.core[(i, j)] / (s_half[i] * s_half[j]));
        let c = DMatrix::from_fn(self.p, k, |i, j| self.u[(i, j)] * s_half[j]);
        let b = DMatrix::from_fn(k, self.m, |i, j| s_half[i] * self.vt[(i, j)]);
        Ok(DiscreteRealization { a, b, c, dt: self.dt })
    }

    /// Modes of the order-`k` model; poles with `|z|` outside `(0, 1]` are dropped.
    pub fn identify(&self, k: usize, band: [f64; 2]) -> Result<ModalSet, EraError> {
        let r = self.realize(k)?;
        let e = eig(&to_complex(&r.a))?;
        let keep: Vec<usize> = (0..e.values.len())
            .filter(|&i| {
                let n = e.values[i].norm();
                n > 0.0 && n <= 1.0
            })
            .collect();
        let values: Vec<_> = keep.iter().map(|&i| e.values[i]).collect();
        let vectors = e.vectors.select_columns(&keep);
        Ok(modes_from_eigenpairs(
            &values,
            &vectors,
            &to_complex(&r.c),
            FrfDomain::DiscreteZ { dt: self.dt },
            band,
            k,
            Method::Era,
        ))
    }
}

/// One-shot ERA identification at order `k`.
pub fn era_identify(irfs: &IrfSet, k: usize, rows: usize, cols: usize, band: [f64; 2]) -> Result<ModalSet, EraError> {
    EraModel::from_irfs(irfs, rows, cols)?.identify(k, band)
}
