#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use oma_core::next::{FrequencyResponseSet, FrfDomain, Provenance};
use oma_core::synth::ModalModel;
use oma_core::C64;
use rand::Rng;

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Poles and residues of a random strictly stable real rational function.
pub struct RandomSystem {
    pub poles: Vec<C64>,
    pub residues: Vec<DMatrix<C64>>,
    pub d: DMatrix<f64>,
}

impl RandomSystem {
    pub fn draw(rng: &mut impl Rng, pairs: usize, p: usize, m: usize) -> RandomSystem {
        let poles = (0..pairs)
            .map(|_| {
                let w = 2.0 * PI * rng.random_range(1.0..50.0);
                let z: f64 = rng.random_range(0.005..0.1);
                C64::new(-z * w, w * (1.0 - z * z).sqrt())
            })
            .collect();
        let residues = (0..pairs)
            .map(|_| DMatrix::from_fn(p, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let d = DMatrix::from_fn(p, m, |_, _| rng.random_range(-0.1..0.1));
        RandomSystem { poles, residues, d }
    }

    pub fn eval(&self, s: C64) -> DMatrix<C64> {
        let mut h = self.d.map(|v| C64::new(v, 0.0));
        for (lam, r) in self.poles.iter().zip(&self.residues) {
            h += r.map(|x| x / (s - lam)) + r.map(|x| x.conj() / (s - lam.conj()));
        }
        h
    }

    pub fn frf(&self, freqs: &[f64]) -> FrequencyResponseSet {
        FrequencyResponseSet {
            freqs: freqs.to_vec(),
            values: freqs.iter().map(|&f| self.eval(C64::new(0.0, 2.0 * PI * f))).collect(),
            domain: FrfDomain::ContinuousLaplace,
            provenance: Provenance::Analytic,
        }
    }
}

pub fn real_shape(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Index of the planted mode nearest in frequency.
pub fn nearest_planted(model: &ModalModel, f: f64) -> usize {
    (0..model.modes.len())
        .min_by(|&a, &b| (model.modes[a].freq_hz - f).abs().total_cmp(&(model.modes[b].freq_hz - f).abs()))
        .expect("model has modes")
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
