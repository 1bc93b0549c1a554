use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{PreprocessError, TimeSeriesSet};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub length: usize,
    pub overlap: usize,
    pub n_dft: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
}

/// Per-channel one-sided PSD and the averaged normalized PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSet {
    pub freqs: Vec<f64>,
    /// `psd[c][b]`, (m/s²)²/Hz.
    pub psd: Vec<Vec<f64>>,
    pub anpsd: Vec<f64>,
    pub window: WindowSpec,
    pub channel_ids: Vec<String>,
}

/// Symmetric Hamming window.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

/// Welch-averaged one-sided PSD for every channel (segment-averaged periodograms,
/// window-power normalized). Returns `(freqs, psd)`.
pub fn psd_matrix(
    ts: &TimeSeriesSet,
    n_dft: usize,
    win_len: usize,
    overlap: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), PreprocessError> {
    if win_len == 0 || win_len > n_dft || overlap >= win_len {
        return Err(PreprocessError::InvalidWindow {
            n_dft,
            win_len,
            overlap,
        });
    }
    let n = ts.n_samples();
    if n < win_len {
        return Err(PreprocessError::RecordTooShort { needed: win_len, got: n });
    }
    let window = hamming(win_len);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let step = win_len - overlap;
    let n_seg = (n - overlap) / step;
    let n_bins = n_dft / 2 + 1;
    let fs = ts.fs;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_dft);

    let psd: Vec<Vec<f64>> = ts
        .data
        .par_iter()
        .map(|x| {
            let mut acc = vec![0.0; n_bins];
            let mut buf = vec![C64::new(0.0, 0.0); n_dft];
            for s in 0..n_seg {
                let seg = &x[s * step..s * step + win_len];
                for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
                    *b = C64::new(v * w, 0.0);
                }
                for b in buf.iter_mut().skip(win_len) {
                    *b = C64::new(0.0, 0.0);
                }
                fft.process(&mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            let scale = 1.0 / (fs * win_power * n_seg as f64);
            for (k, a) in acc.iter_mut().enumerate() {
                let one_sided = if k == 0 || (n_dft.is_multiple_of(2) && k == n_dft / 2) { 1.0 } else { 2.0 };
                *a *= scale * one_sided;
            }
            acc
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / n_dft as f64).collect();
    Ok((freqs, psd))
}

/// Average of per-channel PSDs, each first normalized to unit trapezoidal area.
/// All-zero channels are skipped; if every channel is zero the ANPSD is undefined.
pub fn anpsd(freqs: &[f64], psd: &[Vec<f64>]) -> Result<Vec<f64>, PreprocessError> {
    let mut out = vec![0.0; freqs.len()];
    let mut used = 0usize;
    for ch in psd {
        let area = trapezoid(freqs, ch);
        if area <= 0.0 || !area.is_finite() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(ch) {
            *o += v / area;
        }
        used += 1;
    }
    if used == 0 {
        return Err(PreprocessError::NormalizationDegenerate);
    }
    for o in &mut out {
        *o /= used as f64;
    }
    Ok(out)
}

/// Hamming-windowed Welch PSD of every channel plus the ANPSD.
pub fn welch_psd(
    ts: &TimeSeriesSet,
    n_dft: usize,
    win_len: usize,
    overlap: usize,
) -> Result<SpectralSet, PreprocessError> {
    let (freqs, psd) = psd_matrix(ts, n_dft, win_len, overlap)?;
    let anpsd = anpsd(&freqs, &psd)?;
    Ok(SpectralSet {
        freqs,
        psd,
        anpsd,
        window: WindowSpec {
            kind: WindowKind::Hamming,
            length: win_len,
            overlap,
            n_dft,
        },
        channel_ids: ts.channels.iter().map(|c| c.id.clone()).collect(),
    })
}

impl SpectralSet {
    /// ANPSD linearly interpolated at `f` (zero outside the grid).
    pub fn anpsd_at(&self, f: f64) -> f64 {
        let fr = &self.freqs;
        if fr.is_empty() || f < fr[0] || f > fr[fr.len() - 1] {
            return 0.0;
        }
        let i = fr.partition_point(|&x| x <= f).clamp(1, fr.len() - 1);
        let t = (f - fr[i - 1]) / (fr[i] - fr[i - 1]);
        self.anpsd[i - 1] * (1.0 - t) + self.anpsd[i] * t
    }

    /// `freq_hz, psd_<ch1>, ..., psd_<chP>, anpsd`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = vec!["freq_hz".to_string()];
        header.extend(self.channel_ids.iter().map(|id| format!("psd_{id}")));
        header.push("anpsd".into());
        writeln!(out, "{}", header.join(","))?;
        for (b, f) in self.freqs.iter().enumerate() {
            let mut row = vec![format!("{f:.17e}")];
            row.extend(self.psd.iter().map(|ch| format!("{:.17e}", ch[b])));
            row.push(format!("{:.17e}", self.anpsd[b]));
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    }
}
