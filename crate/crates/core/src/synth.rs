//! Proportionally damped MDOF structures with known modal parameters:
//! ambient response simulation, exact FRFs and correlation models.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::loewner::StateSpaceRealization;
use crate::next::{FrequencyResponseSet, FrfDomain, IrfSet, Provenance};
use crate::preprocess::{ChannelInfo, TimeSeriesSet};
use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("mode {mode}: {reason}")]
    InvalidMode { mode: usize, reason: String },
    #[error("sampling rate {fs} Hz does not exceed twice the highest modal frequency {f_max} Hz")]
    UnstableDiscretization { fs: f64, f_max: f64 },
    #[error("duration {0} s gives fewer than two samples")]
    TooShort(f64),
    #[error("sensor index {0} out of range")]
    UnknownSensor(usize),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedMode {
    pub freq_hz: f64,
    pub zeta: f64,
    /// Real shape over the sensors, unit modal mass.
    pub shape: Vec<f64>,
}

impl PlantedMode {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.freq_hz
    }

    pub fn omega_d(&self) -> f64 {
        self.omega() * (1.0 - self.zeta * self.zeta).sqrt()
    }

    /// Continuous-time pole in the upper half plane.
    pub fn pole(&self) -> C64 {
        C64::new(-self.zeta * self.omega(), self.omega_d())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalModel {
    pub sensors: Vec<String>,
    pub modes: Vec<PlantedMode>,
}

impl ModalModel {
    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (r, m) in self.modes.iter().enumerate() {
            let bad = |reason: &str| Err(SynthError::InvalidMode { mode: r, reason: reason.into() });
            if !(m.zeta > 0.0 && m.zeta < 1.0) {
                return bad("damping ratio must lie in (0, 1)");
            }
            if !(m.freq_hz > 0.0 && m.freq_hz.is_finite()) {
                return bad("frequency must be positive");
            }
            if m.shape.len() != self.n_sensors() {
                return bad("shape length differs from the sensor count");
            }
            if m.shape.iter().all(|&v| v == 0.0) || m.shape.iter().any(|v| !v.is_finite()) {
                return bad("shape must be finite and nonzero");
            }
            if self.modes[..r].iter().any(|o| o.freq_hz == m.freq_hz) {
                return bad("frequency repeats an earlier mode");
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModalModel, SynthError> {
        let m: ModalModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        crate::json::write_file(path, self)?;
        Ok(())
    }

    /// Continuous-time state space, displacement output, force input at
    /// `input_dof`. States are `(q_r, q̇_r)` per mode.
    pub fn realization(&self, input_dof: usize) -> StateSpaceRealization {
        let n = 2 * self.modes.len();
        let p = self.n_sensors();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut c = DMatrix::zeros(p, n);
        for (r, m) in self.modes.iter().enumerate() {
            let w = m.omega();
            a[(2 * r, 2 * r + 1)] = 1.0;
            a[(2 * r + 1, 2 * r)] = -w * w;
            a[(2 * r + 1, 2 * r + 1)] = -2.0 * m.zeta * w;
            b[(2 * r + 1, 0)] = m.shape[input_dof];
            for i in 0..p {
                c[(i, 2 * r)] = m.shape[i];
            }
        }
        StateSpaceRealization {
            e: DMatrix::identity(n, n),
            a,
            b,
            c,
            order: n,
            domain: FrfDomain::ContinuousLaplace,
            shift: None,
            shift_policy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the force sample held over each step.
    pub process_std: f64,
    /// Standard deviation of additive sensor noise.
    pub measurement_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Excitation {
    /// Independent white force at every sensor location.
    #[default]
    AllDofs,
    SinglePoint { dof: usize },
}

/// Exact zero-order-hold discretization of `q̈ + 2ζω q̇ + ω² q = g`.
/// Returns `(Φ, Γ)` with `Φ` row-major.
fn zoh(m: &PlantedMode, h: f64) -> ([f64; 4], [f64; 2]) {
    let w = m.omega();
    let sig = m.zeta * w;
    let wd = m.omega_d();
    let (e, c, s) = ((-sig * h).exp(), (wd * h).cos(), (wd * h).sin());
    let phi = [
        e * (c + sig / wd * s),
        e * s / wd,
        -e * w * w / wd * s,
        e * (c - sig / wd * s),
    ];
    let gamma = [(1.0 - phi[3] - 2.0 * sig * phi[1]) / (w * w), phi[1]];
    (phi, gamma)
}

/// Acceleration response to seeded white-noise forcing, starting at rest.
pub fn simulate_ambient(
    model: &ModalModel,
    fs: f64,
    duration: f64,
    noise: NoiseSpec,
    excitation: Excitation,
    seed: u64,
) -> Result<TimeSeriesSet, SynthError> {
    model.validate()?;
    let f_max = model.modes.iter().map(|m| m.freq_hz).fold(0.0, f64::max);
    if !(fs > 2.0 * f_max) {
        return Err(SynthError::UnstableDiscretization { fs, f_max });
    }
    if fs <= 4.0 * f_max {
        log::warn!("fs = {fs} Hz is at most 4x the highest mode ({f_max} Hz)");
    }
    let slowest = model.modes.iter().map(|m| m.zeta * m.omega()).fold(f64::INFINITY, f64::min);
    if duration < 100.0 / slowest {
        log::warn!("duration {duration} s is shorter than 100 decay times of the slowest mode");
    }
    let n = (duration * fs).round() as usize;
    if n < 2 {
        return Err(SynthError::TooShort(duration));
    }
    let p = model.n_sensors();
    if let Excitation::SinglePoint { dof } = excitation {
        if dof >= p {
            return Err(SynthError::UnknownSensor(dof));
        }
    }
    let disc: Vec<_> = model.modes.iter().map(|m| zoh(m, 1.0 / fs)).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = vec![[0.0f64; 2]; model.modes.len()];
    let mut force = vec![0.0; p];
    let mut data = vec![vec![0.0; n]; p];
    for k in 0..n {
        match excitation {
            Excitation::AllDofs => {
                for f in force.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *f = noise.process_std * g;
                }
            }
            Excitation::SinglePoint { dof } => {
                let g: f64 = StandardNormal.sample(&mut rng);
                force[dof] = noise.process_std * g;
            }
        }
        for ((m, (phi, gamma)), x) in model.modes.iter().zip(&disc).zip(state.iter_mut()) {
            let g: f64 = m.shape.iter().zip(&force).map(|(a, b)| a * b).sum();
            let w = m.omega();
            let acc = -w * w * x[0] - 2.0 * m.zeta * w * x[1] + g;
            for (ch, s) in data.iter_mut().zip(&m.shape) {
                ch[k] += s * acc;
            }
            *x = [
                phi[0] * x[0] + phi[1] * x[1] + gamma[0] * g,
                phi[2] * x[0] + phi[3] * x[1] + gamma[1] * g,
            ];
        }
        for ch in data.iter_mut() {
            let v: f64 = StandardNormal.sample(&mut rng);
            ch[k] += noise.measurement_std * v;
        }
    }
    let channels = model.sensors.iter().map(ChannelInfo::new).collect();
    Ok(TimeSeriesSet::new(channels, data, fs)?)
}

/// Receptance (displacement per unit force) at every sensor for a force at
/// `input_dof`: `Σ_r φ_ir φ_jr / (ω_r² - ω² + 2iζ_r ω_r ω)`.
pub fn analytic_frf(model: &ModalModel, freqs: &[f64], input_dof: usize) -> FrequencyResponseSet {
    let p = model.n_sensors();
    let values = freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            DMatrix::from_fn(p, 1, |i, _| {
                model
                    .modes
                    .iter()
                    .map(|m| {
                        let wr = m.omega();
                        C64::new(m.shape[i] * m.shape[input_dof], 0.0) / C64::new(wr * wr - w * w, 2.0 * m.zeta * wr * w)
                    })
                    .sum()
            })
        })
        .collect();
    FrequencyResponseSet {
        freqs: freqs.to_vec(),
        values,
        domain: FrfDomain::ContinuousLaplace,
        provenance: Provenance::Analytic,
    }
}

/// Which response quantity a correlation model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Displacement,
    Acceleration,
}

/// `R_ij(τ) = Σ_r A_r,ij exp(-ζ_r ω_r τ) sin(ω_d,r τ + θ_r,ij)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDecayModel {
    pub modes: Vec<PlantedMode>,
    /// `amplitude[r][i][j]`.
    pub amplitude: Vec<Vec<Vec<f64>>>,
    /// `phase[r][i][j]`, rad.
    pub phase: Vec<Vec<Vec<f64>>>,
}

impl CorrelationDecayModel {
    /// Single-mode-dominant correlation under white modal forcing of
    /// intensity `intensity · |φ_r|²`; cross-modal coupling is neglected.
    pub fn from_modal_model(model: &ModalModel, intensity: f64, kind: ResponseKind) -> CorrelationDecayModel {
        let p = model.n_sensors();
        let mut amplitude = Vec::new();
        let mut phase = Vec::new();
        for m in &model.modes {
            let w = m.omega();
            let z = m.zeta;
            let q = intensity * m.shape.iter().map(|v| v * v).sum::<f64>();
            let base = q / (4.0 * z * w.powi(3) * (1.0 - z * z).sqrt());
            let theta0 = z.acos();
            // Each time derivative scales by ω and advances the phase by π - acos ζ.
            let (gain, theta) = match kind {
                ResponseKind::Displacement => (1.0, theta0),
                ResponseKind::Acceleration => (w.powi(4), theta0 + 4.0 * (PI - z.acos())),
            };
            amplitude.push((0..p).map(|i| (0..p).map(|j| gain * base * m.shape[i] * m.shape[j]).collect()).collect());
            phase.push(vec![vec![theta; p]; p]);
        }
        CorrelationDecayModel {
            modes: model.modes.clone(),
            amplitude,
            phase,
        }
    }

    pub fn eval(&self, i: usize, j: usize, tau: f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(r, m)| {
                self.amplitude[r][i][j] * (-m.zeta * m.omega() * tau).exp() * (m.omega_d() * tau + self.phase[r][i][j]).sin()
            })
            .sum()
    }
}

/// Correlation model sampled on `lags` steps of `dt`.
pub fn analytic_irf_correlation(model: &CorrelationDecayModel, i: usize, j: usize, lags: usize, dt: f64) -> Vec<f64> {
    (0..lags).map(|l| model.eval(i, j, l as f64 * dt)).collect()
}

/// Correlation model sampled for every output against the given references.
pub fn analytic_irfs(model: &CorrelationDecayModel, sensors: &[String], references: &[usize], lags: usize, dt: f64) -> IrfSet {
    IrfSet {
        data: (0..sensors.len())
            .map(|i| references.iter().map(|&j| analytic_irf_correlation(model, i, j, lags, dt)).collect())
            .collect(),
        dt,
        output_ids: sensors.to_vec(),
        reference_ids: references.iter().map(|&j| sensors[j].clone()).collect(),
    }
}

/// Three well-separated modes on eight sensors.
pub fn three_mode_example() -> ModalModel {
    ModalModel {
        sensors: (1..=8).map(|i| format!("ch{i}")).collect(),
        modes: vec![
            PlantedMode {
                freq_hz: 4.930,
                zeta: 0.016,
                shape: vec![0.21, 0.43, 0.61, 0.76, 0.88, 0.96, 1.0, 0.98],
            },
            PlantedMode {
                freq_hz: 26.922,
                zeta: 0.011,
                shape: vec![0.55, 0.94, 0.97, 0.62, 0.05, -0.52, -0.91, -1.0],
            },
            PlantedMode {
                freq_hz: 77.011,
                zeta: 0.015,
                shape: vec![0.80, 0.96, 0.18, -0.72, -1.0, -0.35, 0.52, 0.93],
            },
        ],
    }
}
