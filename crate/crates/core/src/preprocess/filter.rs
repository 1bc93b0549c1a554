//! Digital Butterworth design (bilinear transform with pre-warping) and
//! zero-phase second-order-section filtering.

use std::f64::consts::PI;

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Bandpass,
    Bandstop,
}

/// One biquad, `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z: C64) -> C64 {
        let zi = z.inv();
        let num = self.b[0] + zi * (self.b[1] + zi * self.b[2]);
        let den = self.a[0] + zi * (self.a[1] + zi * self.a[2]);
        num / den
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    /// Largest pole radius, used to size edge padding.
    pub max_pole_radius: f64,
}

impl Sos {
    pub fn response(&self, f: f64, fs: f64) -> C64 {
        let z = C64::from_polar(1.0, 2.0 * PI * f / fs);
        self.sections.iter().map(|s| s.response(z)).product()
    }

    /// Butterworth filter from an analog prototype of order `order`.
    ///
    /// Band filters double the order (each prototype pole maps to two).
    /// `edges` holds one cutoff for low-pass and `[lo, hi]` otherwise, in Hz.
    pub fn butterworth(order: usize, kind: FilterKind, edges: &[f64], fs: f64) -> Sos {
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let proto: Vec<C64> = (1..=order)
            .map(|k| C64::from_polar(1.0, PI * (2 * k + order - 1) as f64 / (2 * order) as f64))
            .collect();

        let (poles, zeros, norm_freq): (Vec<C64>, Vec<C64>, f64) = match kind {
            FilterKind::Lowpass => {
                let wc = warp(edges[0]);
                (proto.iter().map(|p| p * wc).collect(), vec![], 0.0)
            }
            FilterKind::Bandpass | FilterKind::Bandstop => {
                let (wl, wh) = (warp(edges[0]), warp(edges[1]));
                let bw = wh - wl;
                let w0sq = wl * wh;
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    // Roots of s^2 - c s + w0^2 with c = p*bw (bandpass) or bw/p (bandstop).
                    let c = if kind == FilterKind::Bandpass { p * bw } else { bw / p };
                    let disc = (c * c / 4.0 - w0sq).sqrt();
                    poles.push(c / 2.0 + disc);
                    poles.push(c / 2.0 - disc);
                }
                let zeros = if kind == FilterKind::Bandpass {
                    vec![C64::new(0.0, 0.0); order]
                } else {
                    (0..order)
                        .flat_map(|_| [C64::new(0.0, w0sq.sqrt()), C64::new(0.0, -w0sq.sqrt())])
                        .collect()
                };
                let center = if kind == FilterKind::Bandpass {
                    (w0sq.sqrt() / (2.0 * fs)).atan() * fs / PI
                } else {
                    0.0
                };
                (poles, zeros, center)
            }
        };

        let bilinear = |s: C64| (2.0 * fs + s) / (2.0 * fs - s);
        let zpoles: Vec<C64> = poles.iter().map(|&p| bilinear(p)).collect();
        let mut zzeros: Vec<C64> = zeros.iter().map(|&z| bilinear(z)).collect();
        while zzeros.len() < zpoles.len() {
            zzeros.push(C64::new(-1.0, 0.0));
        }
        let max_pole_radius = zpoles.iter().map(|p| p.norm()).fold(0.0, f64::max);

        let pole_pairs = pair_conjugates(&zpoles);
        let zero_pairs = pair_conjugates(&zzeros);
        let sections = pole_pairs
            .iter()
            .zip(zero_pairs.iter())
            .map(|(p, z)| Biquad {
                b: quadratic(z),
                a: quadratic(p),
            })
            .collect();
        let mut sos = Sos {
            sections,
            max_pole_radius,
        };
        let g = sos.response(norm_freq, fs).norm();
        let first = &mut sos.sections[0];
        for b in &mut first.b {
            *b /= g;
        }
        sos
    }

    /// Direct-form-II-transposed states giving a steady-state response to a
    /// unit step, per section.
    fn step_initial_state(&self) -> Vec<[f64; 2]> {
        let mut gain_in = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
                let y = g * gain_in;
                let z2 = (s.b[2] - s.a[2] * g) * gain_in;
                let z1 = (s.b[1] - s.a[1] * g) * gain_in + z2;
                gain_in = y;
                [z1, z2]
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], init: &[[f64; 2]], scale: f64) {
        for (s, z0) in self.sections.iter().zip(init) {
            let (mut z1, mut z2) = (z0[0] * scale, z0[1] * scale);
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * y + z2;
                z2 = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Forward-backward filtering with odd-extension padding and steady-state
    /// initial conditions. Output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return vec![];
        }
        let decay = if self.max_pole_radius < 1.0 && self.max_pole_radius > 0.0 {
            ((1e-6f64).ln() / self.max_pole_radius.ln()).ceil() as usize
        } else {
            0
        };
        let pad = decay.max(3 * (2 * self.sections.len() + 1)).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_initial_state();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, &zi, first);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn pair_conjugates(roots: &[C64]) -> Vec<[C64; 2]> {
    let tol = 1e-9;
    let mut complex: Vec<C64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let mut reals: Vec<C64> = roots.iter().copied().filter(|r| r.im.abs() <= tol).collect();
    reals.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut pairs: Vec<[C64; 2]> = complex.into_iter().map(|r| [r, r.conj()]).collect();
    for chunk in reals.chunks(2) {
        match chunk {
            [a, b] => pairs.push([C64::new(a.re, 0.0), C64::new(b.re, 0.0)]),
            [a] => pairs.push([C64::new(a.re, 0.0), C64::new(0.0, 0.0)]),
            _ => unreachable!(),
        }
    }
    pairs
}

/// Coefficients of `(1 - r0 z^-1)(1 - r1 z^-1)`.
fn quadratic(r: &[C64; 2]) -> [f64; 3] {
    [1.0, -(r[0] + r[1]).re, (r[0] * r[1]).re]
}
