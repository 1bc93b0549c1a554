use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LoewnerError;
use crate::next::{FrequencyResponseSet, FrfDomain};
use crate::C64;

/// How tangential directions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directions {
    /// Right directions cycle `e_1..e_m`, left directions cycle `e_1..e_p`.
    SimoUnit,
    /// Unit-norm real Gaussian directions from a ChaCha8 stream.
    SeededRandom { seed: u64 },
}

/// Left and right tangential interpolation data, closed under conjugation.
///
/// Points come in blocks: a sample followed by its conjugate, or a single
/// self-conjugate (real) point. `left_blocks` / `right_blocks` hold the block
/// sizes in order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationData {
    pub mu: Vec<C64>,
    /// `v x p`, row `j` is `l_j`.
    pub l: DMatrix<C64>,
    /// `v x m`, row `j` is `v_j = l_j H(μ_j)`.
    pub v: DMatrix<C64>,
    pub lambda: Vec<C64>,
    /// `m x ρ`, column `i` is `r_i`.
    pub r: DMatrix<C64>,
    /// `p x ρ`, column `i` is `w_i = H(λ_i) r_i`.
    pub w: DMatrix<C64>,
    /// Signed frequency of each point, Hz (negative for conjugates).
    pub left_freqs: Vec<f64>,
    pub right_freqs: Vec<f64>,
    pub left_blocks: Vec<usize>,
    pub right_blocks: Vec<usize>,
    pub domain: FrfDomain,
}

impl InterpolationData {
    pub fn n_left(&self) -> usize {
        self.mu.len()
    }

    pub fn n_right(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.l.ncols()
    }

    pub fn n_inputs(&self) -> usize {
        self.v.ncols()
    }
}

struct Side {
    points: Vec<C64>,
    dirs: Vec<Vec<C64>>,
    vals: Vec<Vec<C64>>,
    freqs: Vec<f64>,
    blocks: Vec<usize>,
}

impl Side {
    fn new() -> Self {
        Side {
            points: vec![],
            dirs: vec![],
            vals: vec![],
            freqs: vec![],
            blocks: vec![],
        }
    }

    fn push(&mut self, point: C64, f: f64, dir: Vec<C64>, val: Vec<C64>) {
        if point.im.abs() <= 1e-14 * point.norm() {
            self.points.push(C64::new(point.re, 0.0));
            self.freqs.push(f);
            self.dirs.push(dir.iter().map(|d| C64::new(d.re, 0.0)).collect());
            self.vals.push(val.iter().map(|d| C64::new(d.re, 0.0)).collect());
            self.blocks.push(1);
        } else {
            let conj = |x: &[C64]| x.iter().map(|z| z.conj()).collect::<Vec<_>>();
            self.points.extend([point, point.conj()]);
            self.freqs.extend([f, -f]);
            self.dirs.extend([conj(&conj(&dir)), conj(&dir)]);
            self.vals.extend([conj(&conj(&val)), conj(&val)]);
            self.blocks.push(2);
        }
    }
}

/// Splits the bins alternately into right (even index) and left (odd index)
/// data, attaches tangential directions and adds conjugate samples.
///
/// For discrete-`z` responses the data interpolated is `z^-1 F(z)`, which is
/// strictly proper when `F` is the spectrum of a finite-order sequence.
pub fn partition_samples(frf: &FrequencyResponseSet, directions: Directions) -> Result<InterpolationData, LoewnerError> {
    let n = frf.n_bins();
    if n < 4 {
        return Err(LoewnerError::TooFewBins(n));
    }
    let (p, m) = frf.shape();
    let mut rng = match directions {
        Directions::SeededRandom { seed } => Some(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
        Directions::SimoUnit => None,
    };
    let mut draw = |len: usize, count: usize| -> Vec<C64> {
        match rng.as_mut() {
            None => (0..len).map(|k| C64::new(if k == count % len { 1.0 } else { 0.0 }, 0.0)).collect(),
            Some(rng) => {
                let g: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
                let nrm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                g.into_iter().map(|x| C64::new(x / nrm, 0.0)).collect()
            }
        }
    };

    let (mut right, mut left) = (Side::new(), Side::new());
    for (b, (&f, h)) in frf.freqs.iter().zip(&frf.values).enumerate() {
        let point = frf.domain.point(f);
        let h = match frf.domain {
            FrfDomain::ContinuousLaplace => h.clone(),
            FrfDomain::DiscreteZ { .. } => h / point,
        };
        if b % 2 == 0 {
            let r = draw(m, right.blocks.len());
            let w: Vec<C64> = (0..p).map(|i| (0..m).map(|k| h[(i, k)] * r[k]).sum()).collect();
            right.push(point, f, r, w);
        } else {
            let l = draw(p, left.blocks.len());
            let v: Vec<C64> = (0..m).map(|k| (0..p).map(|i| l[i] * h[(i, k)]).sum()).collect();
            left.push(point, f, l, v);
        }
    }

    let rows = |x: &[Vec<C64>], width: usize| DMatrix::from_fn(x.len(), width, |a, b| x[a][b]);
    Ok(InterpolationData {
        mu: left.points,
        l: rows(&left.dirs, p),
        v: rows(&left.vals, m),
        r: rows(&right.dirs, m).transpose(),
        w: rows(&right.vals, p).transpose(),
        lambda: right.points,
        left_freqs: left.freqs,
        right_freqs: right.freqs,
        left_blocks: left.blocks,
        right_blocks: right.blocks,
        domain: frf.domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::next::Provenance;

    fn frf(n: usize, p: usize) -> FrequencyResponseSet {
        let freqs: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let values = freqs
            .iter()
            .map(|&f| {
                let s = C64::new(0.0, 2.0 * std::f64::consts::PI * f);
                DMatrix::from_fn(p, 1, |i, _| C64::new(1.0 + i as f64, 0.0) / (s + 1.0))
            })
            .collect();
        FrequencyResponseSet {
            freqs,
            values,
            domain: FrfDomain::ContinuousLaplace,
            provenance: Provenance::Analytic,
        }
    }

    #[test]
    fn alternation_and_conjugate_closure() {
        let d = partition_samples(&frf(6, 2), Directions::SimoUnit).unwrap();
        assert_eq!((d.right_blocks.len(), d.left_blocks.len()), (3, 3));
        assert_eq!((d.n_right(), d.n_left()), (6, 6));
        assert_eq!(d.right_freqs, vec![1.0, -1.0, 3.0, -3.0, 5.0, -5.0]);
        assert_eq!(d.mu[1], d.mu[0].conj());
    }

    #[test]
    fn simo_unit_directions() {
        let src = frf(8, 3);
        let d = partition_samples(&src, Directions::SimoUnit).unwrap();
        for i in 0..d.n_right() {
            assert_eq!(d.r[(0, i)], C64::new(1.0, 0.0));
        }
        // w_i equals the FRF column itself when r_i = 1.
        assert_eq!(d.w.column(0), src.values[0].column(0));
        let left_unit: Vec<usize> = (0..d.n_left()).step_by(2).map(|j| (0..3).find(|&c| d.l[(j, c)].re == 1.0).unwrap()).collect();
        assert_eq!(left_unit, vec![0, 1, 2, 0]);
        assert_eq!(d.v[(2, 0)], src.values[3][(1, 0)]);
    }

    #[test]
    fn seeded_directions_reproducible() {
        let a = partition_samples(&frf(10, 3), Directions::SeededRandom { seed: 9 }).unwrap();
        let b = partition_samples(&frf(10, 3), Directions::SeededRandom { seed: 9 }).unwrap();
        assert_eq!(a, b);
        let c = partition_samples(&frf(10, 3), Directions::SeededRandom { seed: 10 }).unwrap();
        assert_ne!(a.l, c.l);
    }

    #[test]
    fn zero_hertz_kept_once() {
        let mut f = frf(5, 1);
        f.freqs[0] = 0.0;
        f.values[0] = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let d = partition_samples(&f, Directions::SimoUnit).unwrap();
        assert_eq!(d.right_blocks, vec![1, 2, 2]);
        assert_eq!(d.n_right(), 5);
    }

    #[test]
    fn too_few_bins() {
        assert!(matches!(partition_samples(&frf(3, 1), Directions::SimoUnit), Err(LoewnerError::TooFewBins(3))));
    }
}
