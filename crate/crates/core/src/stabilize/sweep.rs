use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mac, StabilityCriteria, StabilizeError};
use crate::era::EraModel;
use crate::loewner::{extract_modes, Method, ModalSet, Mode, TruncatedPencilFactors};
use crate::preprocess::SpectralSet;

/// Anything that identifies a [`ModalSet`] at a given model order.
pub trait ModalSource: Sync {
    fn method(&self) -> Method;
    /// Highest order the source can realize.
    fn max_order(&self) -> usize;
    /// All stable modes at order `k`, unfiltered by frequency.
    fn identify(&self, k: usize) -> Result<ModalSet, crate::Error>;
}

impl ModalSource for TruncatedPencilFactors {
    fn method(&self) -> Method {
        Method::Loewner
    }

    fn max_order(&self) -> usize {
        self.rank()
    }

    fn identify(&self, k: usize) -> Result<ModalSet, crate::Error> {
        Ok(extract_modes(&self.realize(k)?, [0.0, f64::INFINITY])?)
    }
}

impl ModalSource for EraModel {
    fn method(&self) -> Method {
        Method::Era
    }

    fn max_order(&self) -> usize {
        self.rank()
    }

    fn identify(&self, k: usize) -> Result<ModalSet, crate::Error> {
        Ok(EraModel::identify(self, k, [0.0, f64::INFINITY])?)
    }
}

/// Stability level of a pole relative to its match at the previous order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    New,
    FreqStable,
    FreqDampStable,
    FullyStable,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::New => "new",
            Flag::FreqStable => "freq_stable",
            Flag::FreqDampStable => "freq_damp_stable",
            Flag::FullyStable => "fully_stable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramPole {
    pub mode: Mode,
    pub flag: Flag,
    /// Consecutive orders, ending here, over which this pole met every criterion.
    pub chain: usize,
    /// Index of the matched pole at the previous order.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramOrder {
    pub k: usize,
    pub poles: Vec<DiagramPole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOrder {
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationDiagram {
    pub orders: Vec<DiagramOrder>,
    pub skipped: Vec<SkippedOrder>,
    pub criteria: StabilityCriteria,
    pub method: Method,
}

/// Identifies every order in `k_range` (in parallel) and flags poles in a
/// sequential ascending pass.
pub fn order_sweep(
    source: &dyn ModalSource,
    k_range: [usize; 2],
    criteria: &StabilityCriteria,
) -> Result<StabilizationDiagram, StabilizeError> {
    let [k_min, k_max] = k_range;
    if k_min == 0 || k_min > k_max {
        return Err(StabilizeError::EmptyOrderRange(k_min, k_max));
    }
    criteria.validate()?;
    let limit = source.max_order();
    let results: Vec<(usize, Result<ModalSet, String>)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let r = if k > limit {
                Err(format!("order exceeds data rank {limit}"))
            } else {
                source.identify(k).map_err(|e| e.to_string())
            };
            (k, r)
        })
        .collect();

    let mut orders = Vec::new();
    let mut skipped = Vec::new();
    for (k, r) in results {
        match r {
            Ok(set) => orders.push(set),
            Err(reason) => skipped.push(SkippedOrder { k, reason }),
        }
    }
    Ok(StabilizationDiagram {
        orders: flag_orders(orders, criteria),
        skipped,
        criteria: criteria.clone(),
        method: source.method(),
    })
}

/// Applies the stability criteria to consecutive identified orders.
pub(crate) fn flag_orders(sets: Vec<ModalSet>, criteria: &StabilityCriteria) -> Vec<DiagramOrder> {
    let mut out: Vec<DiagramOrder> = Vec::with_capacity(sets.len());
    for set in sets {
        let prev = out.last();
        let poles = set
            .modes
            .into_iter()
            .map(|mode| flag_pole(mode, prev, criteria))
            .collect();
        out.push(DiagramOrder { k: set.order, poles });
    }
    out
}

fn flag_pole(mode: Mode, prev: Option<&DiagramOrder>, crit: &StabilityCriteria) -> DiagramPole {
    let eligible = crit.in_bands(mode.freq_hz, mode.zeta);
    let nearest = prev.and_then(|o| {
        o.poles
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.mode.freq_hz - mode.freq_hz).abs();
                let db = (b.1.mode.freq_hz - mode.freq_hz).abs();
                da.total_cmp(&db)
            })
            .filter(|(_, q)| (q.mode.freq_hz - mode.freq_hz).abs() / mode.freq_hz <= 2.0 * crit.freq_rel_tol)
    });
    let Some((idx, parent)) = nearest else {
        return DiagramPole {
            chain: usize::from(eligible),
            mode,
            flag: Flag::New,
            parent: None,
        };
    };
    let df = (mode.freq_hz - parent.mode.freq_hz).abs();
    let freq_ok = df / parent.mode.freq_hz <= crit.freq_rel_tol && crit.freq_abs_tol.is_none_or(|t| df <= t);
    let damp_ok = (mode.zeta - parent.mode.zeta).abs() / parent.mode.zeta <= crit.damp_rel_tol;
    let mac_ok = mac(&mode.shape, &parent.mode.shape).unwrap_or(0.0) >= crit.mac_min;
    let all_ok = eligible && parent.chain > 0 && freq_ok && damp_ok && mac_ok;
    let chain = if all_ok {
        parent.chain + 1
    } else {
        usize::from(eligible)
    };
    let flag = if !eligible || !freq_ok {
        Flag::New
    } else if !damp_ok {
        Flag::FreqStable
    } else if mac_ok && chain >= crit.consecutive {
        Flag::FullyStable
    } else {
        Flag::FreqDampStable
    };
    DiagramPole {
        mode,
        flag,
        chain,
        parent: Some(idx),
    }
}

impl StabilizationDiagram {
    pub fn count(&self, flag: Flag) -> usize {
        self.orders.iter().flat_map(|o| &o.poles).filter(|p| p.flag == flag).count()
    }

    /// Plot data `k,f_hz,zeta,flag,anpsd`; the last column is empty without spectra.
    pub fn write_csv(&self, path: &Path, spectra: Option<&SpectralSet>) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k,f_hz,zeta,flag,anpsd")?;
        for o in &self.orders {
            for p in &o.poles {
                let overlay = spectra.map_or(String::new(), |s| format!("{:.17e}", s.anpsd_at(p.mode.freq_hz)));
                writeln!(
                    out,
                    "{},{:.17e},{:.17e},{},{}",
                    o.k,
                    p.mode.freq_hz,
                    p.mode.zeta,
                    p.flag.as_str(),
                    overlay
                )?;
            }
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn mode(f: f64, z: f64) -> Mode {
        let wn = 2.0 * std::f64::consts::PI * f;
        Mode::from_pole(C64::new(-z * wn, wn * (1.0 - z * z).sqrt()), vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)])
    }

    fn set(k: usize, modes: Vec<Mode>) -> ModalSet {
        ModalSet {
            modes,
            order: k,
            method: Method::Loewner,
            discarded: 0,
        }
    }

    #[test]
    fn frequency_step_within_tolerance() {
        let c = StabilityCriteria::xb2();
        let d = flag_orders(vec![set(6, vec![mode(26.950, 0.0150)]), set(7, vec![mode(26.922, 0.0150)])], &c);
        assert_eq!(d[1].poles[0].flag, Flag::FreqDampStable);
    }

    #[test]
    fn damping_step_outside_tolerance() {
        let c = StabilityCriteria::xb2();
        let d = flag_orders(vec![set(6, vec![mode(10.0, 0.020)]), set(7, vec![mode(10.0, 0.016)])], &c);
        assert_eq!(d[1].poles[0].flag, Flag::FreqStable);
    }

    #[test]
    fn chain_reaches_fully_stable_after_consecutive_orders() {
        let c = StabilityCriteria::xb2();
        let sets = (6..14).map(|k| set(k, vec![mode(4.93, 0.016)])).collect();
        let d = flag_orders(sets, &c);
        let flags: Vec<Flag> = d.iter().map(|o| o.poles[0].flag).collect();
        assert_eq!(flags[0], Flag::New);
        assert_eq!(flags[3], Flag::FreqDampStable);
        assert_eq!(flags[4], Flag::FullyStable);
        assert_eq!(d[4].poles[0].chain, 5);
    }

    #[test]
    fn out_of_band_damping_never_stabilizes() {
        let c = StabilityCriteria::xb2();
        let sets = (6..30).map(|k| set(k, vec![mode(20.0, 0.005)])).collect();
        let d = flag_orders(sets, &c);
        assert!(d.iter().flat_map(|o| &o.poles).all(|p| p.flag == Flag::New));
    }

    #[test]
    fn empty_range_rejected() {
        struct Nothing;
        impl ModalSource for Nothing {
            fn method(&self) -> Method {
                Method::Era
            }
            fn max_order(&self) -> usize {
                0
            }
            fn identify(&self, _: usize) -> Result<ModalSet, crate::Error> {
                unreachable!()
            }
        }
        assert!(matches!(order_sweep(&Nothing, [5, 4], &StabilityCriteria::xb2()), Err(StabilizeError::EmptyOrderRange(5, 4))));
        let d = order_sweep(&Nothing, [1, 3], &StabilityCriteria::xb2()).unwrap();
        assert_eq!(d.skipped.len(), 3);
    }
}
