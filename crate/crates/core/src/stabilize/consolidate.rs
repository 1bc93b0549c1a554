use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{mac, Flag, StabilityCriteria, StabilizationDiagram, StabilizeError};
use crate::loewner::{Method, ModalSet};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedMode {
    /// Median over the group, Hz.
    pub freq_hz: f64,
    /// Median over the group.
    pub zeta: f64,
    /// Shape of the highest-order member.
    pub shape: Vec<C64>,
    /// Number of fully stable poles in the group.
    pub support: usize,
    pub order_range: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedModes {
    pub modes: Vec<ConsolidatedMode>,
    pub criteria: StabilityCriteria,
    pub method: Method,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups fully stable poles whose neighbouring frequencies differ by at most
/// `2 * freq_rel_tol` (relative) and reports one mode per group with enough
/// support.
pub fn consolidate(diagram: &StabilizationDiagram) -> ConsolidatedModes {
    let crit = &diagram.criteria;
    let mut stable: Vec<(usize, &crate::loewner::Mode)> = diagram
        .orders
        .iter()
        .flat_map(|o| o.poles.iter().filter(|p| p.flag == Flag::FullyStable).map(move |p| (o.k, &p.mode)))
        .collect();
    stable.sort_by(|a, b| a.1.freq_hz.total_cmp(&b.1.freq_hz));

    let mut groups: Vec<Vec<(usize, &crate::loewner::Mode)>> = Vec::new();
    for item in stable {
        match groups.last_mut() {
            Some(g) if {
                let last = g.last().expect("groups are nonempty").1.freq_hz;
                (item.1.freq_hz - last) / last <= 2.0 * crit.freq_rel_tol
            } =>
            {
                g.push(item)
            }
            _ => groups.push(vec![item]),
        }
    }

    let modes = groups
        .into_iter()
        .filter(|g| g.len() >= crit.consecutive)
        .map(|g| {
            let top = g.iter().max_by_key(|(k, _)| *k).expect("nonempty group");
            ConsolidatedMode {
                freq_hz: median(g.iter().map(|(_, m)| m.freq_hz).collect()),
                zeta: median(g.iter().map(|(_, m)| m.zeta).collect()),
                shape: top.1.shape.clone(),
                support: g.len(),
                order_range: [g.iter().map(|x| x.0).min().unwrap_or(0), top.0],
            }
        })
        .collect();
    ConsolidatedModes {
        modes,
        criteria: crit.clone(),
        method: diagram.method,
    }
}

/// Frequencies and shapes of a set of modes.
pub trait ShapeSet {
    fn freqs(&self) -> Vec<f64>;
    fn shapes(&self) -> Vec<&[C64]>;
}

impl ShapeSet for ModalSet {
    fn freqs(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.freq_hz).collect()
    }

    fn shapes(&self) -> Vec<&[C64]> {
        self.modes.iter().map(|m| m.shape.as_slice()).collect()
    }
}

impl ShapeSet for ConsolidatedModes {
    fn freqs(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.freq_hz).collect()
    }

    fn shapes(&self) -> Vec<&[C64]> {
        self.modes.iter().map(|m| m.shape.as_slice()).collect()
    }
}

/// Full MAC matrix and the diagonal after frequency matching.
#[derive(Debug, Clone, PartialEq)]
pub struct MacComparison {
    pub matrix: DMatrix<f64>,
    /// `(index in a, index in b, MAC)` for frequency-matched pairs, ascending in `a`.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl MacComparison {
    pub fn diagonal(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.2).collect()
    }
}

/// Greedy nearest-relative-frequency one-to-one assignment.
pub fn match_by_frequency(fa: &[f64], fb: &[f64], max_rel: f64) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in fa.iter().enumerate() {
        for (j, b) in fb.iter().enumerate() {
            let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            if rel <= max_rel {
                cand.push((rel, i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut used_a, mut used_b) = (vec![false; fa.len()], vec![false; fb.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

pub fn mac_matrix(a: &dyn ShapeSet, b: &dyn ShapeSet) -> Result<MacComparison, StabilizeError> {
    let (sa, sb) = (a.shapes(), b.shapes());
    let mut matrix = DMatrix::zeros(sa.len(), sb.len());
    for (i, x) in sa.iter().enumerate() {
        for (j, y) in sb.iter().enumerate() {
            matrix[(i, j)] = match mac(x, y) {
                Err(StabilizeError::ZeroVector) => 0.0,
                r => r?,
            };
        }
    }
    let pairs = match_by_frequency(&a.freqs(), &b.freqs(), f64::INFINITY)
        .into_iter()
        .map(|(i, j)| (i, j, matrix[(i, j)]))
        .collect();
    Ok(MacComparison { matrix, pairs })
}
