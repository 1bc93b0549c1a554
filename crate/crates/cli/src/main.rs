use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oma_core::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use oma_core::report::{compare_runs, ModeTable};
use oma_core::synth::{simulate_ambient, Excitation, ModalModel, NoiseSpec, SynthError};

/// Output-only modal identification.
#[derive(Parser)]
#[command(name = "oma", version)]
struct Cli {
    /// Worker threads for the order sweep (defaults to all cores).
    #[arg(long, env = "OMA_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline config and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two mode tables (a run directory or any modes JSON); B is the reference.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Writes comparison.md into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate an ambient acceleration record from a modal model.
    Synth {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds.
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        /// Hz.
        #[arg(long, default_value_t = 256.0)]
        fs: f64,
        #[arg(long, default_value_t = 1.0)]
        process_std: f64,
        #[arg(long, default_value_t = 0.0)]
        measurement_std: f64,
        /// Force a single sensor location instead of all of them.
        #[arg(long)]
        input_dof: Option<usize>,
        /// Directory for record.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn modes_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("modes.json")
    } else {
        p.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<ExitCode, oma_core::Error> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let summary = run_pipeline(&cfg)?;
            print!("{}", std::fs::read_to_string(summary.output_dir.join("modes.md")).map_err(PipelineError::from)?);
            eprintln!("{} modes written to {}", summary.n_modes, summary.output_dir.display());
            Ok(if summary.n_modes == 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Compare { a, b, out } => {
            let (ta, tb) = (ModeTable::load(&modes_path(&a))?, ModeTable::load(&modes_path(&b))?);
            let md = compare_runs(&ta, &tb)?.markdown();
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("comparison.md"), &md)).map_err(PipelineError::from)?;
            }
            print!("{md}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            model,
            seed,
            duration,
            fs,
            process_std,
            measurement_std,
            input_dof,
            out,
        } => {
            let model = ModalModel::load(&model)?;
            let excitation = input_dof.map_or(Excitation::AllDofs, |dof| Excitation::SinglePoint { dof });
            let noise = NoiseSpec { process_std, measurement_std };
            let ts = simulate_ambient(&model, fs, duration, noise, excitation, seed)?;
            std::fs::create_dir_all(&out).map_err(SynthError::from)?;
            let path = out.join("record.csv");
            ts.write_csv(&path)?;
            eprintln!("{} samples x {} channels written to {}", ts.n_samples(), ts.n_channels(), path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
