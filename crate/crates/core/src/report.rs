//! Mode tables, run comparisons and their Markdown rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::loewner::ModalSet;
use crate::stabilize::{mac, match_by_frequency, ConsolidatedModes};
use crate::C64;

/// Largest relative frequency difference for two modes to be paired.
pub const PAIR_TOL: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no pair of modes within {}% in frequency", PAIR_TOL * 100.0)]
    NoOverlap,
    #[error("mode table is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ShapeEntry {
    Real(f64),
    Complex([f64; 2]),
}

fn shape_from_entries(v: Vec<ShapeEntry>) -> Vec<C64> {
    v.into_iter()
        .map(|e| match e {
            ShapeEntry::Real(x) => C64::new(x, 0.0),
            ShapeEntry::Complex([re, im]) => C64::new(re, im),
        })
        .collect()
}

#[derive(Deserialize)]
struct RawRow {
    freq_hz: f64,
    zeta: f64,
    #[serde(default)]
    shape: Option<Vec<ShapeEntry>>,
}

#[derive(Deserialize)]
struct RawTable {
    modes: Vec<RawRow>,
}

/// One identified or reference mode. Shapes are optional for references.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRow {
    pub freq_hz: f64,
    pub zeta: f64,
    pub shape: Option<Vec<C64>>,
}

/// Modes from a run (`modes.json`), a single-order set, or a hand-written
/// reference: any JSON object with `modes: [{freq_hz, zeta, shape?}]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeTable {
    pub modes: Vec<ModeRow>,
}

impl ModeTable {
    pub fn load(path: &Path) -> Result<ModeTable, ReportError> {
        let raw: RawTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(ModeTable {
            modes: raw
                .modes
                .into_iter()
                .map(|r| ModeRow {
                    freq_hz: r.freq_hz,
                    zeta: r.zeta,
                    shape: r.shape.map(shape_from_entries),
                })
                .collect(),
        })
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.freq_hz).collect()
    }
}

impl From<&ConsolidatedModes> for ModeTable {
    fn from(c: &ConsolidatedModes) -> Self {
        ModeTable {
            modes: c
                .modes
                .iter()
                .map(|m| ModeRow {
                    freq_hz: m.freq_hz,
                    zeta: m.zeta,
                    shape: Some(m.shape.clone()),
                })
                .collect(),
        }
    }
}

impl From<&ModalSet> for ModeTable {
    fn from(s: &ModalSet) -> Self {
        ModeTable {
            modes: s
                .modes
                .iter()
                .map(|m| ModeRow {
                    freq_hz: m.freq_hz,
                    zeta: m.zeta,
                    shape: Some(m.shape.clone()),
                })
                .collect(),
        }
    }
}

/// Signed `100 (value - reference) / reference`.
pub fn percent_diff(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedMode {
    pub index_a: usize,
    pub index_b: usize,
    pub freq_a: f64,
    pub freq_b: f64,
    pub freq_diff_pct: f64,
    pub zeta_diff_pct: f64,
    /// `None` when either side lacks a shape.
    pub mac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub pairs: Vec<PairedMode>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

/// Pairs modes of `a` with those of reference `b` by nearest frequency and
/// reports percent differences relative to `b`.
pub fn compare_runs(a: &ModeTable, b: &ModeTable) -> Result<Comparison, ReportError> {
    if a.modes.is_empty() || b.modes.is_empty() {
        return Err(ReportError::Empty);
    }
    let matched = match_by_frequency(&a.freqs(), &b.freqs(), PAIR_TOL);
    if matched.is_empty() {
        return Err(ReportError::NoOverlap);
    }
    let pairs: Vec<PairedMode> = matched
        .iter()
        .map(|&(i, j)| {
            let (x, y) = (&a.modes[i], &b.modes[j]);
            let mac = match (&x.shape, &y.shape) {
                (Some(s), Some(t)) => mac(s, t).ok(),
                _ => None,
            };
            PairedMode {
                index_a: i,
                index_b: j,
                freq_a: x.freq_hz,
                freq_b: y.freq_hz,
                freq_diff_pct: percent_diff(x.freq_hz, y.freq_hz),
                zeta_diff_pct: percent_diff(x.zeta, y.zeta),
                mac,
            }
        })
        .collect();
    Ok(Comparison {
        unmatched_a: (0..a.modes.len()).filter(|i| !matched.iter().any(|p| p.0 == *i)).collect(),
        unmatched_b: (0..b.modes.len()).filter(|j| !matched.iter().any(|p| p.1 == *j)).collect(),
        pairs,
    })
}

impl Comparison {
    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| A | B | f_A [Hz] | f_B [Hz] | df [%] | dzeta [%] | MAC |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for p in &self.pairs {
            let mac = p.mac.map_or("-".to_string(), |m| format!("{m:.4}"));
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:+.2} | {:+.2} | {} |",
                p.index_a + 1,
                p.index_b + 1,
                p.freq_a,
                p.freq_b,
                p.freq_diff_pct,
                p.zeta_diff_pct,
                mac
            );
        }
        if !self.unmatched_a.is_empty() || !self.unmatched_b.is_empty() {
            let list = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ");
            let _ = writeln!(s, "\nOnly in A: {}. Only in B: {}.", list(&self.unmatched_a), list(&self.unmatched_b));
        }
        s
    }
}

/// Table of consolidated modes; with a reference, signed percent differences
/// follow each value in parentheses.
pub fn modes_markdown(modes: &ConsolidatedModes, reference: Option<&ModeTable>) -> String {
    let own = ModeTable::from(modes);
    let pairs = reference.map(|r| match_by_frequency(&own.freqs(), &r.freqs(), PAIR_TOL)).unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "| Mode | f_n [Hz] | zeta_n [-] | Support | Orders |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for (i, m) in modes.modes.iter().enumerate() {
        let r = pairs.iter().find(|p| p.0 == i).and_then(|p| reference.map(|r| &r.modes[p.1]));
        let pct = |v: f64, rv: f64| format!(" ({:+.2})", percent_diff(v, rv));
        let (df, dz) = r.map_or((String::new(), String::new()), |r| (pct(m.freq_hz, r.freq_hz), pct(m.zeta, r.zeta)));
        let _ = writeln!(
            s,
            "| {} | {:.3}{} | {:.4}{} | {} | {}-{} |",
            i + 1,
            m.freq_hz,
            df,
            m.zeta,
            dz,
            m.support,
            m.order_range[0],
            m.order_range[1]
        );
    }
    s
}
