//! Output correlation functions as impulse-response-like sequences, and their
//! one-sided spectra used as equivalent FRFs.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::preprocess::TimeSeriesSet;
use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum NextError {
    #[error("lag count {lags} must be at least 2 and below the record length {n}")]
    LagExceedsRecord { lags: usize, n: usize },
    #[error("unknown reference channel {0:?}")]
    UnknownReference(String),
    #[error("no references given")]
    NoReferences,
    #[error("no frequency bins in [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("FFT length {n_fft} is shorter than the lag count {lags}")]
    FftTooShort { n_fft: usize, lags: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Correlation sequences `data[i][j][lag]` for output `i` and reference `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfSet {
    pub data: Vec<Vec<Vec<f64>>>,
    pub dt: f64,
    pub output_ids: Vec<String>,
    pub reference_ids: Vec<String>,
}

impl IrfSet {
    pub fn n_outputs(&self) -> usize {
        self.data.len()
    }

    pub fn n_references(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn n_lags(&self) -> usize {
        self.data.first().and_then(|r| r.first()).map_or(0, Vec::len)
    }

    /// `p x m` matrix of samples at one lag.
    pub fn lag_matrix(&self, lag: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_outputs(), self.n_references(), |i, j| self.data[i][j][lag])
    }

    /// Long-form CSV: `out_ch,ref_ch,lag,value`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "out_ch,ref_ch,lag,value")?;
        for (i, row) in self.data.iter().enumerate() {
            for (j, seq) in row.iter().enumerate() {
                for (l, v) in seq.iter().enumerate() {
                    writeln!(out, "{},{},{},{:.17e}", self.output_ids[i], self.reference_ids[j], l, v)?;
                }
            }
        }
        out.flush()
    }

    pub fn manifest(&self) -> IrfManifest {
        IrfManifest {
            outputs: self.output_ids.clone(),
            references: self.reference_ids.clone(),
            n_lags: self.n_lags(),
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfManifest {
    pub outputs: Vec<String>,
    pub references: Vec<String>,
    pub n_lags: usize,
    pub dt: f64,
}

/// Variable in which a frequency response is a rational function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrfDomain {
    /// `H(s)` evaluated at `s = i 2πf`.
    ContinuousLaplace,
    /// DFT of a sampled sequence, `F(z)` at `z = exp(i 2πf dt)`.
    DiscreteZ { dt: f64 },
}

impl FrfDomain {
    /// Interpolation variable at frequency `f`.
    pub fn point(&self, f: f64) -> C64 {
        match *self {
            FrfDomain::ContinuousLaplace => C64::new(0.0, 2.0 * std::f64::consts::PI * f),
            FrfDomain::DiscreteZ { dt } => C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * dt),
        }
    }

    /// Continuous-time pole for a pole of the interpolant.
    pub fn to_laplace(&self, pole: C64) -> C64 {
        match *self {
            FrfDomain::ContinuousLaplace => pole,
            FrfDomain::DiscreteZ { dt } => pole.ln() / dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// Spectrum of correlation sequences. `exp_window` is the decay rate
    /// (1/s) of an exponential window applied before the FFT, if any.
    NextDerived { exp_window: Option<f64> },
    Analytic,
    Measured,
}

/// Complex frequency response samples, one `p x m` matrix per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponseSet {
    pub freqs: Vec<f64>,
    pub values: Vec<DMatrix<C64>>,
    pub domain: FrfDomain,
    pub provenance: Provenance,
}

impl FrequencyResponseSet {
    pub fn n_bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.first().map_or((0, 0), |m| m.shape())
    }

    /// Long-form CSV: `out_ch,ref_ch,freq_hz,re,im`, channels by index.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "out_ch,ref_ch,freq_hz,re,im")?;
        let (p, m) = self.shape();
        for i in 0..p {
            for j in 0..m {
                for (f, h) in self.freqs.iter().zip(&self.values) {
                    let z = h[(i, j)];
                    writeln!(out, "{i},{j},{f:.17e},{:.17e},{:.17e}", z.re, z.im)?;
                }
            }
        }
        out.flush()
    }
}

fn check_lags(n: usize, lags: usize) -> Result<(), NextError> {
    if lags < 2 || lags >= n {
        return Err(NextError::LagExceedsRecord { lags, n });
    }
    Ok(())
}

fn padded_spectrum(x: &[f64], n_fft: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    buf.resize(n_fft, C64::new(0.0, 0.0));
    planner.plan_fft_forward(n_fft).process(&mut buf);
    buf
}

fn unbiased_from_spectra(xi: &[C64], xj: &[C64], n: usize, lags: usize) -> Vec<f64> {
    let n_fft = xi.len();
    let mut prod: Vec<C64> = xi.iter().zip(xj).map(|(a, b)| a.conj() * b).collect();
    FftPlanner::<f64>::new().plan_fft_inverse(n_fft).process(&mut prod);
    (0..lags).map(|l| prod[l].re / (n_fft as f64 * (n - l) as f64)).collect()
}

/// Unbiased estimate of `E[y_i[k] y_j[k + lag]]` for `lag = 0..lags`.
pub fn xcorr_unbiased(ts: &TimeSeriesSet, i: usize, j: usize, lags: usize) -> Result<Vec<f64>, NextError> {
    let n = ts.n_samples();
    check_lags(n, lags)?;
    let n_fft = (n + lags).next_power_of_two();
    let mut planner = FftPlanner::new();
    let xi = padded_spectrum(&ts.data[i], n_fft, &mut planner);
    let xj = padded_spectrum(&ts.data[j], n_fft, &mut planner);
    Ok(unbiased_from_spectra(&xi, &xj, n, lags))
}

/// Correlations of every output against each reference channel.
pub fn build_irfs(ts: &TimeSeriesSet, references: &[String], lags: usize) -> Result<IrfSet, NextError> {
    if references.is_empty() {
        return Err(NextError::NoReferences);
    }
    let n = ts.n_samples();
    check_lags(n, lags)?;
    let refs: Vec<usize> = references
        .iter()
        .map(|r| ts.channel_index(r).ok_or_else(|| NextError::UnknownReference(r.clone())))
        .collect::<Result<_, _>>()?;
    let n_fft = (n + lags).next_power_of_two();
    let spectra: Vec<Vec<C64>> = ts
        .data
        .par_iter()
        .map(|x| padded_spectrum(x, n_fft, &mut FftPlanner::new()))
        .collect();
    let data = (0..ts.n_channels())
        .into_par_iter()
        .map(|i| {
            refs.iter()
                .map(|&j| unbiased_from_spectra(&spectra[i], &spectra[j], n, lags))
                .collect()
        })
        .collect();
    Ok(IrfSet {
        data,
        dt: ts.dt(),
        output_ids: ts.channels.iter().map(|c| c.id.clone()).collect(),
        reference_ids: references.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrfOptions {
    /// Defaults to the next power of two not below the lag count.
    pub n_fft: Option<usize>,
    pub band: [f64; 2],
    /// Decay rate (1/s) of an optional exponential window `exp(-rate * lag * dt)`.
    pub exp_window: Option<f64>,
}

/// One-sided DFT of every correlation sequence, restricted to `band`.
///
/// The result lives in the discrete `z` domain: bin `f` holds
/// `Σ_lag R[lag] z^-lag` at `z = exp(i 2πf dt)`.
pub fn irf_to_frf(irfs: &IrfSet, opts: &FrfOptions) -> Result<FrequencyResponseSet, NextError> {
    let lags = irfs.n_lags();
    let n_fft = opts.n_fft.unwrap_or_else(|| lags.next_power_of_two());
    if n_fft < lags {
        return Err(NextError::FftTooShort { n_fft, lags });
    }
    let df = 1.0 / (n_fft as f64 * irfs.dt);
    let [lo, hi] = opts.band;
    // Bins whose nominal frequency lies in the band, with a little slack for rounding.
    let slack = 1e-9 * df;
    let k_lo = ((lo - slack) / df).ceil().max(0.0) as usize;
    let k_hi = (((hi + slack) / df).floor() as usize).min(n_fft / 2);
    if !(lo < hi) || k_lo > k_hi {
        return Err(NextError::EmptyBand { lo, hi });
    }
    let (p, m) = (irfs.n_outputs(), irfs.n_references());
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let spectra: Vec<Vec<Vec<C64>>> = irfs
        .data
        .par_iter()
        .map(|row| {
            row.iter()
                .map(|seq| {
                    let mut buf: Vec<C64> = seq
                        .iter()
                        .enumerate()
                        .map(|(l, &v)| {
                            let w = opts.exp_window.map_or(1.0, |a| (-a * l as f64 * irfs.dt).exp());
                            C64::new(v * w, 0.0)
                        })
                        .collect();
                    buf.resize(n_fft, C64::new(0.0, 0.0));
                    fft.process(&mut buf);
                    buf
                })
                .collect()
        })
        .collect();
    let freqs = (k_lo..=k_hi).map(|k| k as f64 * df).collect();
    let values = (k_lo..=k_hi)
        .map(|k| DMatrix::from_fn(p, m, |i, j| spectra[i][j][k]))
        .collect();
    Ok(FrequencyResponseSet {
        freqs,
        values,
        domain: FrfDomain::DiscreteZ { dt: irfs.dt },
        provenance: Provenance::NextDerived {
            exp_window: opts.exp_window,
        },
    })
}

/// Sum of log-PSD peak prominences (decades) for every channel. Higher scores
/// mean clearer resonance peaks; a heuristic for picking reference channels.
pub fn reference_scores(psd: &[Vec<f64>], min_prominence: f64) -> Vec<f64> {
    psd.iter()
        .map(|ch| {
            let lg: Vec<f64> = ch.iter().map(|v| v.max(f64::MIN_POSITIVE).log10()).collect();
            let mut score = 0.0;
            for k in 1..lg.len().saturating_sub(1) {
                if lg[k] > lg[k - 1] && lg[k] >= lg[k + 1] {
                    let left = lg[..k].iter().rev().take_while(|&&v| v < lg[k]).fold(lg[k], |a, &v| a.min(v));
                    let right = lg[k + 1..].iter().take_while(|&&v| v <= lg[k]).fold(lg[k], |a, &v| a.min(v));
                    let prom = lg[k] - left.max(right);
                    if prom >= min_prominence {
                        score += prom;
                    }
                }
            }
            score
        })
        .collect()
}
