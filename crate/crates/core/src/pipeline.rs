//! Configuration-driven end-to-end runs: preprocess, NExT, FFT, Loewner (or
//! ERA), stabilization, consolidation and report emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::era::{default_blocks, EraModel};
use crate::loewner::{build_pencil, partition_samples, Directions, ShiftPolicy, TruncatedPencilFactors};
use crate::next::{build_irfs, irf_to_frf, FrfOptions};
use crate::preprocess::{self, load_timeseries, welch_psd, BandKind, InputFormat, TimeSeriesSet};
use crate::report::{modes_markdown, ModeTable};
use crate::stabilize::{consolidate, order_sweep, ConsolidatedModes, ModalSource, StabilityCriteria};
use crate::synth::{simulate_ambient, Excitation, ModalModel, NoiseSpec};

pub const LOCK_FILE: &str = ".oma.lock";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("output directory {0} is in use by another run")]
    OutputLocked(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    File {
        path: PathBuf,
        /// Inferred from the extension when absent.
        #[serde(default)]
        format: Option<InputFormat>,
    },
    Synthetic {
        model: ModalModel,
        fs: f64,
        duration: f64,
        seed: u64,
        noise: NoiseSpec,
        #[serde(default)]
        excitation: Excitation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: BandKind,
    /// Hz.
    pub lo: f64,
    /// Hz.
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// `[start, stop]` seconds; either end may be null.
    #[serde(default)]
    pub trim: Option<[Option<f64>; 2]>,
    #[serde(default = "yes")]
    pub detrend: bool,
    /// Hz.
    #[serde(default)]
    pub decimate_to: Option<f64>,
    /// Applied in order after decimation.
    #[serde(default)]
    pub filters: Vec<FilterConfig>,
}

fn yes() -> bool {
    true
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            trim: None,
            detrend: true,
            decimate_to: None,
            filters: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub n_dft: usize,
    pub win_len: usize,
    pub overlap: usize,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        SpectraConfig {
            n_dft: 2048,
            win_len: 1024,
            overlap: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NextConfig {
    pub references: Vec<String>,
    pub lags: usize,
    #[serde(default)]
    pub n_fft: Option<usize>,
    /// Hz.
    pub band: [f64; 2],
    /// 1/s.
    #[serde(default)]
    pub exp_window: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Loewner {
        k_range: [usize; 2],
        #[serde(default)]
        shift_policy: ShiftPolicy,
        #[serde(default = "simo_unit")]
        directions: Directions,
    },
    Era {
        k_range: [usize; 2],
        #[serde(default)]
        rows: Option<usize>,
        #[serde(default)]
        cols: Option<usize>,
    },
}

fn simo_unit() -> Directions {
    Directions::SimoUnit
}

impl MethodConfig {
    pub fn k_range(&self) -> [usize; 2] {
        match *self {
            MethodConfig::Loewner { k_range, .. } | MethodConfig::Era { k_range, .. } => k_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub spectra: SpectraConfig,
    pub next: NextConfig,
    pub method: MethodConfig,
    pub criteria: StabilityCriteria,
    pub output_dir: PathBuf,
    /// Mode table for percent differences in `modes.md`.
    #[serde(default)]
    pub reference_modes: Option<PathBuf>,
}

impl PipelineConfig {
    /// Parses a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let mut cfg: PipelineConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Joins every relative path onto `base`.
    pub fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InputConfig::File { path, .. } = &mut self.input {
            join(path);
        }
        join(&mut self.output_dir);
        if let Some(r) = &mut self.reference_modes {
            join(r);
        }
    }

    /// Fills every optional setting with the value the run will use.
    pub fn resolved(&self) -> PipelineConfig {
        let mut c = self.clone();
        if let InputConfig::File { path, format } = &mut c.input {
            format.get_or_insert_with(|| InputFormat::from_path(path));
        }
        c.next.n_fft.get_or_insert(c.next.lags.next_power_of_two());
        if let MethodConfig::Era { rows, cols, .. } = &mut c.method {
            let b = default_blocks(c.next.lags);
            rows.get_or_insert(b);
            cols.get_or_insert(b);
        }
        c
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.into()).into());
        if self.next.references.is_empty() {
            return bad("at least one reference channel is needed");
        }
        if self.next.lags < 2 {
            return bad("lags must be at least 2");
        }
        let [k0, k1] = self.method.k_range();
        if k0 == 0 || k0 > k1 {
            return bad("k_range must be an ascending pair of positive orders");
        }
        self.criteria.validate()?;
        Ok(())
    }
}

/// What a completed run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub n_modes: usize,
    pub modes: ConsolidatedModes,
    pub skipped_orders: usize,
    pub artifacts: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn discard(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Lock, PipelineError> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::OutputLocked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Loads or simulates the record and applies trim, detrend, decimation and filters.
pub fn prepare_signals(cfg: &PipelineConfig) -> Result<TimeSeriesSet, crate::Error> {
    let mut ts = match &cfg.input {
        InputConfig::File { path, format } => load_timeseries(path, format.unwrap_or_else(|| InputFormat::from_path(path)))?,
        InputConfig::Synthetic {
            model,
            fs,
            duration,
            seed,
            noise,
            excitation,
        } => simulate_ambient(model, *fs, *duration, *noise, *excitation, *seed)?,
    };
    let pp = &cfg.preprocess;
    if let Some([start, stop]) = pp.trim {
        ts = ts.trim(start, stop)?;
    }
    if pp.detrend {
        ts = preprocess::detrend(&ts);
    }
    if let Some(target) = pp.decimate_to {
        ts = preprocess::decimate(&ts, target)?;
    }
    for f in &pp.filters {
        ts = preprocess::filter_band(&ts, f.kind, f.lo, f.hi)?;
    }
    Ok(ts)
}

/// Runs the full workflow and writes every artifact into `output_dir`.
/// On failure the files this run created are removed.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, crate::Error> {
    config.validate()?;
    let cfg = config.resolved();
    let dir = cfg.output_dir.clone();
    let created_dir = !dir.exists();
    fs::create_dir_all(&dir).map_err(PipelineError::from)?;
    let lock = match Lock::acquire(&dir) {
        Ok(l) => l,
        Err(e) => {
            if created_dir {
                let _ = fs::remove_dir(&dir);
            }
            return Err(e.into());
        }
    };
    let mut artifacts = Artifacts {
        dir,
        created_dir,
        files: Vec::new(),
    };
    let result = execute(&cfg, &mut artifacts);
    drop(lock);
    if result.is_err() {
        artifacts.discard();
    }
    result
}

fn execute(cfg: &PipelineConfig, out: &mut Artifacts) -> Result<RunSummary, crate::Error> {
    let io = |e: std::io::Error| crate::Error::from(PipelineError::from(e));
    let t0 = Instant::now();
    crate::json::write_file(&out.path("config.json"), cfg).map_err(io)?;

    let ts = prepare_signals(cfg)?;
    let sp = &cfg.spectra;
    let spectra = welch_psd(&ts, sp.n_dft, sp.win_len, sp.overlap)?;
    spectra.write_csv(&out.path("spectra.csv")).map_err(io)?;
    log::info!("preprocessed {} channels at {} Hz in {:?}", ts.n_channels(), ts.fs, t0.elapsed());

    let irfs = build_irfs(&ts, &cfg.next.references, cfg.next.lags)?;
    irfs.write_csv(&out.path("irfs.csv")).map_err(io)?;
    crate::json::write_file(&out.path("irf_manifest.json"), &irfs.manifest()).map_err(io)?;

    let source: Box<dyn ModalSource> = match cfg.method {
        MethodConfig::Loewner {
            shift_policy,
            directions,
            ..
        } => {
            let frf = irf_to_frf(
                &irfs,
                &FrfOptions {
                    n_fft: cfg.next.n_fft,
                    band: cfg.next.band,
                    exp_window: cfg.next.exp_window,
                },
            )?;
            let pencil = build_pencil(partition_samples(&frf, directions)?)?;
            Box::new(TruncatedPencilFactors::new(&pencil, shift_policy))
        }
        MethodConfig::Era { rows, cols, .. } => {
            let b = default_blocks(cfg.next.lags);
            Box::new(EraModel::from_irfs(&irfs, rows.unwrap_or(b), cols.unwrap_or(b))?)
        }
    };
    log::info!("model source ready (max order {}) after {:?}", source.max_order(), t0.elapsed());

    let diagram = order_sweep(source.as_ref(), cfg.method.k_range(), &cfg.criteria)?;
    for s in &diagram.skipped {
        log::warn!("order {} skipped: {}", s.k, s.reason);
    }
    diagram.write_csv(&out.path("diagram.csv"), Some(&spectra)).map_err(io)?;
    crate::json::write_file(&out.path("diagram.json"), &diagram).map_err(io)?;

    let modes = consolidate(&diagram);
    crate::json::write_file(&out.path("modes.json"), &modes).map_err(io)?;
    let reference = match &cfg.reference_modes {
        Some(p) => Some(ModeTable::load(p)?),
        None => None,
    };
    fs::write(out.path("modes.md"), modes_markdown(&modes, reference.as_ref())).map_err(io)?;
    log::info!("{} modes in {:?}", modes.modes.len(), t0.elapsed());

    Ok(RunSummary {
        output_dir: out.dir.clone(),
        n_modes: modes.modes.len(),
        skipped_orders: diagram.skipped.len(),
        modes,
        artifacts: out.files.clone(),
    })
}
