//! Acceptance criteria, one PASS/FAIL/SKIP line each.

mod common;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{linspace, median, nearest_planted, real_shape, RandomSystem};
use nalgebra::DMatrix;
use oma_core::era::{default_blocks, EraModel};
use oma_core::loewner::{
    build_pencil, evaluate_model, extract_modes, partition_samples, sylvester_residuals, Directions, ShiftPolicy,
    TruncatedPencilFactors,
};
use oma_core::next::{irf_to_frf, FrfOptions};
use oma_core::pipeline::{run_pipeline, InputConfig, PipelineConfig};
use oma_core::report::ModeTable;
use oma_core::stabilize::{consolidate, mac, mac_matrix, order_sweep, Flag, StabilityCriteria};
use oma_core::synth::{analytic_frf, analytic_irfs, three_mode_example, CorrelationDecayModel, PlantedMode, ResponseKind};
use oma_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn exact_interpolation() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let model = three_mode_example();
    let freqs = linspace(1.0, 100.0, 400);
    let frf = analytic_frf(&model, &freqs, 7);
    let pencil = build_pencil(partition_samples(&frf, Directions::SimoUnit).unwrap()).unwrap();
    let real = TruncatedPencilFactors::new(&pencil, ShiftPolicy::MaxMagnitude).realize(6).unwrap();
    let modes = extract_modes(&real, [0.0, 128.0]).unwrap();
    let fit = evaluate_model(&real, &freqs).unwrap();
    let elapsed = t.elapsed();

    let mut worst_mode = 0.0f64;
    for (m, p) in modes.modes.iter().zip(&model.modes) {
        worst_mode = worst_mode.max(((m.freq_hz - p.freq_hz) / p.freq_hz).abs());
        worst_mode = worst_mode.max(((m.zeta - p.zeta) / p.zeta).abs());
    }
    let worst_sample = fit
        .values
        .iter()
        .zip(&frf.values)
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max);
    let ok = modes.modes.len() == 3 && worst_mode <= 1e-6 && worst_sample <= 1e-6 && elapsed < Duration::from_secs(2);
    let detail = format!(
        "{} modes, max rel (f, zeta) error {worst_mode:.1e}, max rel sample error {worst_sample:.1e}",
        modes.modes.len()
    );
    (verdict(ok, detail), Some(elapsed))
}

fn sylvester_identities() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pairs = rng.random_range(1..=6);
        let (p, m) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let bins = rng.random_range(20..=200);
        let sys = RandomSystem::draw(&mut rng, pairs, p, m);
        let frf = sys.frf(&linspace(0.5, 60.0, bins));
        let dirs = Directions::SeededRandom { seed: rng.random() };
        let pencil = build_pencil(partition_samples(&frf, dirs).unwrap()).unwrap();
        let (r1, r2) = sylvester_residuals(&pencil);
        worst = worst.max(r1).max(r2);
    }
    let elapsed = t.elapsed();
    let ok = worst <= 1e-10 && elapsed < Duration::from_secs(10);
    (verdict(ok, format!("100 pencils, worst relative residual {worst:.1e}")), Some(elapsed))
}

fn rank_condition() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let model = three_mode_example();
    let frf = analytic_frf(&model, &linspace(1.0, 100.0, 400), 7);
    let pencil = build_pencil(partition_samples(&frf, Directions::SimoUnit).unwrap()).unwrap();
    let d = &pencil.data;
    let mut shifts: Vec<C64> = d.mu.iter().step_by(20).copied().collect();
    shifts.extend(d.lambda.iter().step_by(40).copied());
    shifts.extend([C64::new(0.0, 1.0), C64::new(0.0, 2.0 * PI * 40.0), C64::new(-3.0, 100.0)]);
    let mut worst = 0.0f64;
    let mut ranks_ok = true;
    for &z in &shifts {
        let s = (&pencil.ll * z - &pencil.lls).singular_values();
        let ratio = s[6] / s[0];
        worst = worst.max(ratio);
        ranks_ok &= s[5] / s[0] > 1e-10;
    }
    for policy in [ShiftPolicy::FirstSample, ShiftPolicy::MaxMagnitude] {
        ranks_ok &= TruncatedPencilFactors::new(&pencil, policy).rank() == 6;
    }
    let ok = ranks_ok && worst <= 1e-10;
    let detail = format!("{} shifts, rank 6 each, worst sigma_7/sigma_1 {worst:.1e}", shifts.len());
    (verdict(ok, detail), Some(t.elapsed()))
}

fn cross_method() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let model = three_mode_example();
    let decay = CorrelationDecayModel::from_modal_model(&model, 1.0, ResponseKind::Acceleration);
    let irfs = analytic_irfs(&decay, &model.sensors, &[7], 2048, 1.0 / 256.0);
    let frf = irf_to_frf(&irfs, &FrfOptions { n_fft: None, band: [3.25, 85.0], exp_window: None }).unwrap();
    let pencil = build_pencil(partition_samples(&frf, Directions::SimoUnit).unwrap()).unwrap();
    let lf = extract_modes(&TruncatedPencilFactors::new(&pencil, ShiftPolicy::MaxMagnitude).realize(6).unwrap(), [0.0, 128.0])
        .unwrap();
    let b = default_blocks(2048);
    let era = EraModel::from_irfs(&irfs, b, b).unwrap().identify(6, [0.0, 128.0]).unwrap();
    let cmp = mac_matrix(&lf, &era).unwrap();
    let pole_err = cmp
        .pairs
        .iter()
        .map(|&(i, j, _)| (lf.modes[i].pole - era.modes[j].pole).norm() / era.modes[j].pole.norm())
        .fold(0.0, f64::max);
    let min_mac = cmp.diagonal().into_iter().fold(1.0, f64::min);
    let ok = lf.modes.len() == 3 && era.modes.len() == 3 && cmp.pairs.len() == 3 && pole_err <= 1e-6 && min_mac >= 1.0 - 1e-8;
    let detail = format!("max relative pole gap {pole_err:.1e}, min MAC 1 - {:.1e}", 1.0 - min_mac);
    (verdict(ok, detail), Some(t.elapsed()))
}

fn smoke_preset() -> PipelineConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/presets/synthetic-smoke.json");
    PipelineConfig::load(&path).expect("shipped preset parses")
}

fn end_to_end() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let model = three_mode_example();
    let dir = tempfile::tempdir().unwrap();
    let (mut counts, mut df, mut dz, mut macs) = (vec![], vec![], vec![], vec![]);
    let mut slowest = Duration::ZERO;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let ts = Instant::now();
        let mut cfg = smoke_preset();
        cfg.criteria = StabilityCriteria::xb2();
        if let InputConfig::Synthetic { duration, seed: s, .. } = &mut cfg.input {
            *duration = 1200.0;
            *s = seed;
        }
        cfg.output_dir = dir.path().join(format!("seed{seed}"));
        let run = run_pipeline(&cfg).unwrap();
        slowest = slowest.max(ts.elapsed());
        let (mut wf, mut wz, mut wm) = (0.0f64, 0.0f64, 1.0f64);
        for m in &run.modes.modes {
            let p = &model.modes[nearest_planted(&model, m.freq_hz)];
            wf = wf.max(((m.freq_hz - p.freq_hz) / p.freq_hz).abs());
            wz = wz.max(((m.zeta - p.zeta) / p.zeta).abs());
            wm = wm.min(mac(&m.shape, &real_shape(&p.shape)).unwrap());
        }
        lines.push(format!(
            "seed {seed}: {} modes, |df|/f {:.2}%, |dz|/z {:.1}%, MAC {:.4}",
            run.n_modes,
            100.0 * wf,
            100.0 * wz,
            wm
        ));
        counts.push(run.n_modes as f64);
        df.push(wf);
        dz.push(wz);
        macs.push(wm);
    }
    let (c, f, z, m) = (median(counts), median(df), median(dz), median(macs));
    let ok = c == 3.0 && f <= 0.01 && z <= 0.30 && m >= 0.98 && slowest < Duration::from_secs(60);
    let detail = format!(
        "median over 5 seeds: {c} modes, |df|/f {:.2}%, |dz|/z {:.1}%, MAC {m:.4}; slowest seed {:.1} s\n      {}",
        100.0 * f,
        100.0 * z,
        slowest.as_secs_f64(),
        lines.join("\n      ")
    );
    (verdict(ok, detail), Some(t.elapsed()))
}

fn criteria_behavior() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    // A fourth, lightly damped mode below the damping band.
    let mut cfg = smoke_preset();
    let dir = tempfile::tempdir().unwrap();
    cfg.output_dir = dir.path().join("light");
    cfg.criteria = StabilityCriteria::xb2();
    if let InputConfig::Synthetic { model, duration, .. } = &mut cfg.input {
        model.modes.insert(
            1,
            PlantedMode { freq_hz: 15.0, zeta: 0.005, shape: vec![1.0, 0.8, 0.3, -0.2, -0.6, -0.9, -0.7, -0.4] },
        );
        *duration = 600.0;
    }
    let run = run_pipeline(&cfg).unwrap();
    let light_consolidated = run.modes.modes.iter().any(|m| (m.freq_hz - 15.0).abs() < 0.3);
    let diagram: oma_core::stabilize::StabilizationDiagram =
        serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("diagram.json")).unwrap()).unwrap();
    let light_seen = diagram.orders.iter().flat_map(|o| &o.poles).any(|p| (p.mode.freq_hz - 15.0).abs() < 0.3);

    let mut noise_free = true;
    let InputConfig::Synthetic { model, .. } = &cfg.input else { unreachable!() };
    let decay = CorrelationDecayModel::from_modal_model(model, 1.0, ResponseKind::Acceleration);
    let irfs = analytic_irfs(&decay, &model.sensors, &[7], 2048, 1.0 / 256.0);
    let frf = irf_to_frf(&irfs, &FrfOptions { n_fft: None, band: [3.25, 85.0], exp_window: None }).unwrap();
    let factors = TruncatedPencilFactors::new(&build_pencil(partition_samples(&frf, Directions::SimoUnit).unwrap()).unwrap(), ShiftPolicy::MaxMagnitude);
    let clean = consolidate(&order_sweep(&factors, [6, 30], &StabilityCriteria::xb2()).unwrap());
    noise_free &= !clean.modes.iter().any(|m| (m.freq_hz - 15.0).abs() < 0.3);

    // Tolerance ladder on the noisy record from the same run.
    let noisy_diagram = diagram;
    let ladder = [0.005, 0.0025, 0.001, 0.0005];
    let mut counts = Vec::new();
    let mut cfg300 = smoke_preset();
    cfg300.output_dir = dir.path().join("ladder");
    let ts = oma_core::pipeline::prepare_signals(&cfg300).unwrap();
    let irfs = oma_core::next::build_irfs(&ts, &cfg300.next.references, cfg300.next.lags).unwrap();
    let frf = irf_to_frf(&irfs, &FrfOptions { n_fft: None, band: [3.25, 85.0], exp_window: None }).unwrap();
    let factors = TruncatedPencilFactors::new(&build_pencil(partition_samples(&frf, Directions::SimoUnit).unwrap()).unwrap(), ShiftPolicy::MaxMagnitude);
    for tol in ladder {
        let mut c = StabilityCriteria::xb2();
        c.freq_rel_tol = tol;
        counts.push(order_sweep(&factors, [6, 50], &c).unwrap().count(Flag::FullyStable));
    }
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    let ok = monotone && !light_consolidated && light_seen && noise_free && noisy_diagram.count(Flag::FullyStable) > 0;
    let detail = format!(
        "fully stable counts for freq_rel_tol {ladder:?}: {counts:?}; zeta = 0.005 mode at 15 Hz identified {light_seen}, consolidated {light_consolidated} (noisy) / {} (noise-free)",
        !noise_free
    );
    (verdict(ok, detail), Some(t.elapsed()))
}

fn xb2_reproduction() -> (Outcome, Option<Duration>) {
    let preset = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/presets/xb2.json");
    let mut cfg = PipelineConfig::load(&preset).unwrap();
    let InputConfig::File { path, .. } = &cfg.input else { unreachable!() };
    let data = std::env::var_os("OMA_XB2_DATA").map(PathBuf::from).unwrap_or_else(|| path.clone());
    if !data.exists() {
        return (Outcome::Skip(format!("XB-2 record not found at {} (set OMA_XB2_DATA)", data.display())), None);
    }
    let t = Instant::now();
    if let InputConfig::File { path, .. } = &mut cfg.input {
        *path = data;
    }
    let dir = tempfile::tempdir().unwrap();
    cfg.output_dir = dir.path().join("xb2");
    let run = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(e) => return (Outcome::Fail(format!("run failed: {e}")), Some(t.elapsed())),
    };
    let published = [4.930, 26.922, 77.011];
    let found = ModeTable::from(&run.modes).freqs();
    let within = published.iter().all(|p| found.iter().any(|f| ((f - p) / p).abs() <= 0.02));
    let reference = cfg.reference_modes.as_ref().map(|p| ModeTable::load(p).unwrap());
    let shapes = reference.as_ref().is_some_and(|r| r.modes.iter().all(|m| m.shape.is_some()));
    let detail = format!("frequencies {found:.3?} vs {published:?}");
    if !shapes {
        return (
            if within { Outcome::Skip(format!("{detail}; benchmark shapes unavailable, MAC not checked")) } else { Outcome::Fail(detail) },
            Some(t.elapsed()),
        );
    }
    let cmp = oma_core::report::compare_runs(&ModeTable::from(&run.modes), reference.as_ref().unwrap()).unwrap();
    let macs: Vec<f64> = cmp.pairs.iter().filter_map(|p| p.mac).collect();
    let ok = within && macs.len() == 3 && macs.iter().all(|&m| m >= 0.95);
    (verdict(ok, format!("{detail}, MAC {macs:.4?}")), Some(t.elapsed()))
}

fn mac_properties() -> (Outcome, Option<Duration>) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = |rng: &mut ChaCha8Rng| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let (mut scale, mut sym, mut orth, mut bounds) = (0.0f64, 0.0f64, 0.0f64, true);
    let trials = 5000;
    for _ in 0..trials {
        let n = rng.random_range(1..=24);
        let a: Vec<C64> = (0..n).map(|_| c(&mut rng)).collect();
        let b: Vec<C64> = (0..n).map(|_| c(&mut rng)).collect();
        let alpha = c(&mut rng) * 10f64.powf(rng.random_range(-30.0..30.0));
        let ab = mac(&a, &b).unwrap();
        bounds &= (0.0..=1.0).contains(&ab);
        let scaled: Vec<C64> = a.iter().map(|x| x * alpha).collect();
        scale = scale.max((mac(&scaled, &b).unwrap() - ab).abs());
        scale = scale.max((mac(&a, &scaled).unwrap() - 1.0).abs());
        sym = sym.max((mac(&b, &a).unwrap() - ab).abs());
        if n >= 2 {
            let aa: C64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().into();
            let ab_dot: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            let perp: Vec<C64> = b.iter().zip(&a).map(|(y, x)| y - x * (ab_dot / aa)).collect();
            orth = orth.max(mac(&a, &perp).unwrap());
        }
    }
    // Exactly orthogonal unit vectors.
    let e = |i: usize| DMatrix::<f64>::identity(6, 6).column(i).iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>();
    let unit_zero = (0..6).all(|i| (0..6).all(|j| i == j || mac(&e(i), &e(j)).unwrap() == 0.0));
    let ok = bounds && unit_zero && scale <= 1e-12 && sym <= 1e-12 && orth <= 1e-12;
    let detail = format!("{trials} random pairs: scale {scale:.1e}, symmetry {sym:.1e}, orthogonal {orth:.1e}");
    (verdict(ok, detail), Some(t.elapsed()))
}

type Check = fn() -> (Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("exact interpolation recovery", exact_interpolation),
        ("Sylvester identities", sylvester_identities),
        ("rank condition", rank_condition),
        ("cross-method agreement", cross_method),
        ("end-to-end synthetic identification", end_to_end),
        ("stabilization criteria behavior", criteria_behavior),
        ("XB-2 reproduction", xb2_reproduction),
        ("MAC properties", mac_properties),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (outcome, elapsed) = run();
        let time = elapsed.map_or(String::new(), |d| format!(" [{:.2} s]", d.as_secs_f64()));
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name}: {detail}{time}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
