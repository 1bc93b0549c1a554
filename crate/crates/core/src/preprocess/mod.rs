//! Ingestion and conditioning of multichannel acceleration records.

mod filter;
mod spectral;
mod timeseries;

pub use filter::{Biquad, FilterKind, Sos};
pub use spectral::{anpsd, hamming, psd_matrix, welch_psd, SpectralSet, WindowKind, WindowSpec};
pub use timeseries::{load_timeseries, BinaryHeader, ChannelInfo, InputFormat, TimeSeriesSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Prototype order of every Butterworth filter used in conditioning.
pub const BUTTERWORTH_ORDER: usize = 4;

/// Anti-alias cutoff as a fraction of the post-decimation Nyquist frequency.
pub const ANTI_ALIAS_FRACTION: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("missing or malformed header: {0}")]
    MissingHeader(String),
    #[error("row {row}: expected {expected} columns, found {found}")]
    InconsistentColumnCount { row: usize, expected: usize, found: usize },
    #[error("non-finite sample at row {row}, column {column}")]
    NonFiniteSample { row: usize, column: usize },
    #[error("channel {channel} has {found} samples, expected {expected}")]
    RaggedChannels { channel: String, expected: usize, found: usize },
    #[error("invalid sampling frequency {0}")]
    InvalidSamplingRate(f64),
    #[error("record too short: need {needed} samples, got {got}")]
    RecordTooShort { needed: usize, got: usize },
    #[error("sampling rate {fs} Hz is not an integer multiple of {target} Hz")]
    NonIntegerFactor { fs: f64, target: f64 },
    #[error("band [{lo}, {hi}] Hz is outside (0, {nyquist}) Hz or empty")]
    BandOutOfRange { lo: f64, hi: f64, nyquist: f64 },
    #[error("invalid Welch settings: n_dft={n_dft}, win_len={win_len}, overlap={overlap}")]
    InvalidWindow { n_dft: usize, win_len: usize, overlap: usize },
    #[error("every channel has zero spectral area; ANPSD is undefined")]
    NormalizationDegenerate,
    #[error("header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    Bandpass,
    Bandstop,
}

fn map_channels(ts: &TimeSeriesSet, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> TimeSeriesSet {
    TimeSeriesSet {
        channels: ts.channels.clone(),
        data: ts.data.par_iter().map(|ch| f(ch)).collect(),
        fs: ts.fs,
        t0: ts.t0,
    }
}

/// Removes each channel's least-squares line (mean and slope).
pub fn detrend(ts: &TimeSeriesSet) -> TimeSeriesSet {
    map_channels(ts, |x| {
        let n = x.len() as f64;
        let tm = (n - 1.0) / 2.0;
        let xm = x.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let dt = k as f64 - tm;
            sxy += dt * (v - xm);
            sxx += dt * dt;
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        x.iter()
            .enumerate()
            .map(|(k, v)| v - xm - slope * (k as f64 - tm))
            .collect()
    })
}

/// Integer-factor decimation with a zero-phase Butterworth anti-alias filter.
///
/// The cutoff sits at [`ANTI_ALIAS_FRACTION`] of the new Nyquist frequency.
/// A factor of one returns the input unchanged.
pub fn decimate(ts: &TimeSeriesSet, target_fs: f64) -> Result<TimeSeriesSet, PreprocessError> {
    let ratio = ts.fs / target_fs;
    let factor = ratio.round();
    if !(target_fs > 0.0) || factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(PreprocessError::NonIntegerFactor {
            fs: ts.fs,
            target: target_fs,
        });
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(ts.clone());
    }
    let sos = Sos::butterworth(
        BUTTERWORTH_ORDER,
        FilterKind::Lowpass,
        &[ANTI_ALIAS_FRACTION * target_fs / 2.0],
        ts.fs,
    );
    let keep = ts.n_samples() / factor;
    let out = map_channels(ts, |x| sos.filtfilt(x).into_iter().step_by(factor).take(keep).collect());
    let out = TimeSeriesSet { fs: target_fs, ..out };
    out.validate()?;
    Ok(out)
}

/// Zero-phase Butterworth band-pass or band-stop filtering of every channel.
pub fn filter_band(ts: &TimeSeriesSet, kind: BandKind, f_lo: f64, f_hi: f64) -> Result<TimeSeriesSet, PreprocessError> {
    let nyquist = ts.fs / 2.0;
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < nyquist) {
        return Err(PreprocessError::BandOutOfRange {
            lo: f_lo,
            hi: f_hi,
            nyquist,
        });
    }
    let fk = match kind {
        BandKind::Bandpass => FilterKind::Bandpass,
        BandKind::Bandstop => FilterKind::Bandstop,
    };
    let sos = Sos::butterworth(BUTTERWORTH_ORDER, fk, &[f_lo, f_hi], ts.fs);
    Ok(map_channels(ts, |x| sos.filtfilt(x)))
}
