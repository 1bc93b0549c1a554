use std::f64::consts::PI;

use oma_core::loewner::{Method, ModalSet, Mode};
use oma_core::stabilize::{consolidate, mac, order_sweep, Flag, ModalSource, StabilityCriteria};
use oma_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cvec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b)), n)
}

fn nonzero(v: &[C64]) -> bool {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6
}

/// Jittered copies of a few physical poles plus scattered noise poles.
struct Jittered {
    seed: u64,
    physical: Vec<(f64, f64)>,
    jitter: f64,
}

impl ModalSource for Jittered {
    fn method(&self) -> Method {
        Method::Loewner
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn identify(&self, k: usize) -> Result<ModalSet, oma_core::Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (k as u64).wrapping_mul(0x9e37_79b9));
        let mut modes = Vec::new();
        let mut push = |f: f64, z: f64, shape: Vec<f64>| {
            let w = 2.0 * PI * f;
            let pole = C64::new(-z * w, w * (1.0 - z * z).sqrt());
            modes.push(Mode::from_pole(pole, shape.into_iter().map(|v| C64::new(v, 0.0)).collect()));
        };
        for (i, &(f, z)) in self.physical.iter().enumerate() {
            let j = |rng: &mut ChaCha8Rng| 1.0 + self.jitter * rng.random_range(-1.0..1.0);
            let shape = (0..4).map(|s| ((s + 1) as f64 * (i + 1) as f64).sin() * j(&mut rng)).collect();
            push(f * j(&mut rng), z * j(&mut rng), shape);
        }
        for _ in 0..k / 4 {
            let shape = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            push(rng.random_range(1.0..90.0), rng.random_range(0.0..0.2), shape);
        }
        modes.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
        Ok(ModalSet { modes, order: k, method: Method::Loewner, discarded: 0 })
    }
}

fn source(seed: u64, jitter: f64) -> Jittered {
    Jittered { seed, physical: vec![(4.93, 0.016), (15.0, 0.005), (26.9, 0.011), (77.0, 0.015)], jitter }
}

proptest! {
    #[test]
    fn mac_bounded_and_symmetric(a in cvec(6), b in cvec(6)) {
        prop_assume!(nonzero(&a) && nonzero(&b));
        let ab = mac(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - mac(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn mac_ignores_complex_scaling(a in cvec(5), b in cvec(5), re in -5.0..5.0f64, im in -5.0..5.0f64, exp in -40i32..40) {
        prop_assume!(nonzero(&a) && nonzero(&b) && (re.abs() + im.abs()) > 1e-3);
        let alpha = C64::new(re, im) * 10f64.powi(exp);
        let scaled: Vec<C64> = a.iter().map(|x| x * alpha).collect();
        prop_assert!((mac(&scaled, &b).unwrap() - mac(&a, &b).unwrap()).abs() <= 1e-12);
        prop_assert!((mac(&scaled, &a).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mac_of_orthogonal_complement_is_zero(a in cvec(7), b in cvec(7)) {
        prop_assume!(nonzero(&a) && nonzero(&b));
        let aa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let dot: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        let perp: Vec<C64> = b.iter().zip(&a).map(|(y, x)| y - x * (dot / aa)).collect();
        prop_assume!(nonzero(&perp));
        prop_assert!(mac(&a, &perp).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tightening_tolerances_never_adds_stable_poles(seed in any::<u64>(), jitter in 0.0..0.006f64) {
        let src = source(seed, jitter);
        let count = |c: &StabilityCriteria| order_sweep(&src, [6, 40], c).unwrap().count(Flag::FullyStable);
        let mut prev = usize::MAX;
        for tol in [0.005, 0.0025, 0.001, 0.0005] {
            let mut c = StabilityCriteria::xb2();
            c.freq_rel_tol = tol;
            let n = count(&c);
            prop_assert!(n <= prev, "freq tol {tol}: {n} > {prev}");
            prev = n;
        }
        let base = count(&StabilityCriteria::xb2());
        let mut c = StabilityCriteria::xb2();
        c.damp_rel_tol = 0.01;
        prop_assert!(count(&c) <= base);
        c = StabilityCriteria::xb2();
        c.mac_min = 0.999;
        prop_assert!(count(&c) <= base);
        c = StabilityCriteria::xb2();
        c.freq_abs_tol = Some(0.01);
        prop_assert!(count(&c) <= base);
    }

    #[test]
    fn consolidated_modes_respect_bands_and_support(seed in any::<u64>(), jitter in 0.0..0.002f64) {
        let crit = StabilityCriteria::xb2();
        let modes = consolidate(&order_sweep(&source(seed, jitter), [6, 40], &crit).unwrap());
        prop_assert!(!modes.modes.iter().any(|m| (m.freq_hz - 15.0).abs() < 0.5), "light mode consolidated");
        prop_assert!(modes.modes.iter().any(|m| (m.freq_hz - 26.9).abs() < 0.2));
        for w in modes.modes.windows(2) {
            prop_assert!(w[0].freq_hz < w[1].freq_hz);
        }
        for m in &modes.modes {
            prop_assert!(m.support >= crit.consecutive);
            prop_assert!(crit.in_bands(m.freq_hz, m.zeta));
        }
    }
}
