use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pilotwave::analytic::AnalyticParams;
use pilotwave::archive::{encode_record, load_ensemble, save_ensemble, sha256_hex, METADATA_FILE};
use pilotwave::config::{default_config, RunConfig, MAX_SEED};
use pilotwave::ensemble::{
    calibrate as measure, ensemble_digest, run_ensemble, run_observed, Calibration, EnsembleResult,
};
use pilotwave::export;
use pilotwave::stats::{
    born_reference, born_series_at, compare as compare_series, pdf_series, uniform_grid, DensitySeries,
};
use pilotwave::Error;

use crate::args::{AnalyticArgs, Cli, CompareArgs, EnsembleArgs, ExportArgs, RunArgs, WindowArgs};
use crate::outdir::{io, RunDir};
use crate::CliError;

/// Widest field heatmap written by `run`, in pixels.
const MAX_HEATMAP_COLUMNS: usize = 1200;

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|source| io(p, source))?,
        None => default_config().to_toml(),
    };
    let mut cfg = RunConfig::from_toml_with_overrides(&text, &cli.overrides)?;
    if let Some(h) = cli.horizon {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Usage(format!("--horizon must be positive (got {h})")));
        }
        cfg = cfg.with_duration(h);
    }
    cfg.validate()
        .map_err(|v| Error::InvalidConfig(v.into_iter().map(|v| v.message).collect()))?;
    Ok(cfg)
}

/// Archive-based commands take their configuration from the archive.
fn reject_config_flags(cli: &Cli, command: &str) -> Result<(), CliError> {
    if cli.config.is_some() || !cli.overrides.is_empty() || cli.horizon.is_some() {
        return Err(CliError::Usage(format!(
            "{command} reads its configuration from the archive; --config, --set and --horizon do not apply"
        )));
    }
    Ok(())
}

fn calibration_toml(cal: &Calibration) -> String {
    format!(
        "epsilon_p = {}\nphi_char = {}\nraw_phi_char = {}\n",
        cal.epsilon_p, cal.phi_char, cal.raw_phi_char
    )
}

fn finish(dir: &RunDir) {
    println!("{}", dir.path.display());
}

pub fn calibrate(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    eprintln!("calibrating");
    let cal = measure(&cfg)?;
    let toml = cfg.to_toml();
    let dir = RunDir::create(&cli.out, "calibrate", &toml)?;
    dir.write("config.toml", &toml)?;
    dir.write("calibration.toml", calibration_toml(&cal))?;
    dir.manifest(
        "calibrate",
        &args(&["--config", "config.toml", "calibrate"]),
        &cfg.digest(),
        &[],
    )?;
    print!("{}", calibration_toml(&cal));
    finish(&dir);
    Ok(())
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// `n` steps spread evenly over `0..=nt`.
fn snapshot_steps(n: usize, nt: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = match n {
        0 => Vec::new(),
        1 => vec![nt],
        n => (0..n).map(|i| (2 * i * nt + (n - 1)) / (2 * (n - 1))).collect(),
    };
    steps.dedup();
    steps
}

pub fn run(cli: &Cli, a: &RunArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(cli)?;
    if let Some(seed) = a.seed {
        if seed > MAX_SEED {
            return Err(CliError::Usage(format!("--seed must not exceed {MAX_SEED}")));
        }
        cfg.seed = seed;
    }
    let toml = cfg.to_toml();
    let dir = RunDir::create(&cli.out, "run", &format!("{toml}\nsnapshots = {}", a.snapshots))?;
    eprintln!("calibrating");
    let cal = measure(&cfg)?;
    eprintln!("running seed {} for {} steps", cfg.seed, cfg.grid.nt);

    let steps = snapshot_steps(a.snapshots, cfg.grid.nt);
    let column_stride = cfg.grid.nx.div_ceil(MAX_HEATMAP_COLUMNS);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut snaps: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    let record = run_observed(&cfg, &cal, |v| {
        if v.step % cfg.sample_stride == 0 {
            rows.push(v.field.phi_curr.iter().step_by(column_stride).copied().collect());
        }
        if steps.binary_search(&v.step).is_ok() {
            snaps.push((v.step, v.field.t, v.field.phi_curr.clone()));
        }
    })?;

    dir.write("config.toml", &toml)?;
    dir.write("calibration.toml", calibration_toml(&cal))?;
    let mut text = Vec::new();
    export::write_trajectory(&record, &mut text).map_err(|e| io(&dir.path, e))?;
    dir.write("trajectory.txt", text)?;
    dir.write("trajectory.bin", encode_record(&record))?;
    dir.write("field.ppm", export::signed_heatmap(&rows))?;
    let nodes = cfg.grid.nodes();
    for (step, t, phi) in &snaps {
        let mut s = format!("# step {step} t {t}\n# x phi\n");
        for (x, v) in nodes.iter().zip(phi) {
            let _ = writeln!(s, "{x} {v}");
        }
        dir.write(&format!("snapshots/step-{step:07}.txt"), s)?;
    }
    let seed = cfg.seed.to_string();
    let snapshots = a.snapshots.to_string();
    dir.manifest(
        "run",
        &args(&[
            "--config",
            "config.toml",
            "run",
            "--seed",
            &seed,
            "--snapshots",
            &snapshots,
        ]),
        &cfg.digest(),
        &[],
    )?;
    let last = record.len() - 1;
    println!(
        "seed = {}\nfinal_t = {}\nfinal_x = {}\nfinal_beta = {}",
        cfg.seed, record.times[last], record.positions[last], record.betas[last]
    );
    finish(&dir);
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn ensemble(cli: &Cli, a: &EnsembleArgs) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let workers = a.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let mut shared = cfg.clone();
    shared.seed = 0;
    shared.snapshot_stride = None;
    let toml = shared.to_toml();
    let dir = RunDir::create(
        &cli.out,
        "ensemble",
        &format!("{toml}\nruns = {}\nseed_base = {}", a.runs, a.seed_base),
    )?;
    eprintln!("ensemble of {} runs on {workers} workers", a.runs);
    let result = run_ensemble(&cfg, a.runs, a.seed_base, workers)?;
    if result.records.is_empty() {
        let first = &result.failures[0];
        return Err(CliError::Simulation(format!(
            "every run failed; first failure (seed {}): {}",
            first.seed, first.error
        )));
    }
    for f in &result.failures {
        eprintln!("warning: seed {} failed: {}", f.seed, f.error);
    }
    save_ensemble(&result, &dir.path)?;
    dir.write("config.toml", &toml)?;
    let reach = cfg.params.c * cfg.grid.duration() + cfg.params.lambda_c();
    dir.write(
        "trajectories.ppm",
        export::trajectory_heatmap(&result.records, cfg.x0 - reach, cfg.x0 + reach, 800),
    )?;
    let runs = a.runs.to_string();
    let base = a.seed_base.to_string();
    dir.manifest(
        "ensemble",
        &args(&[
            "--config",
            "config.toml",
            "ensemble",
            "--runs",
            &runs,
            "--seed-base",
            &base,
        ]),
        &ensemble_digest(&cfg),
        &[],
    )?;
    println!(
        "runs = {}\nfailed = {}\nphi_char = {}",
        result.records.len(),
        result.failures.len(),
        result.phi_char()
    );
    finish(&dir);
    Ok(())
}

struct Window {
    times: Vec<f64>,
    xs: Vec<f64>,
}

fn window(
    w: &WindowArgs,
    cfg: &RunConfig,
    sampled: &[f64],
    default_t: f64,
    default_half: f64,
) -> Result<Window, CliError> {
    let t_max = w.t_max.unwrap_or(default_t);
    let half = w.x_half_width.unwrap_or(default_half);
    if !(t_max >= 0.0) || !(half > 0.0) || !(w.x_step > 0.0) {
        return Err(CliError::Usage(
            "--t-max must be non-negative, --x-half-width and --x-step positive".into(),
        ));
    }
    let lo = (cfg.x0 - half).max(cfg.grid.x_min);
    let hi = (cfg.x0 + half).min(cfg.grid.x_max);
    let n = ((hi - lo) / w.x_step).floor() as usize + 1;
    if n < 2 {
        return Err(CliError::Usage("density window holds fewer than two points".into()));
    }
    let slack = 1e-9 * cfg.grid.dt;
    let times: Vec<f64> = sampled.iter().copied().filter(|&t| t <= t_max + slack).collect();
    Ok(Window {
        times,
        xs: uniform_grid(lo, lo + (n - 1) as f64 * w.x_step, n),
    })
}

/// Sample times of a run with `cfg`, as the simulation computes them.
fn sample_times(cfg: &RunConfig) -> Vec<f64> {
    (0..=cfg.grid.nt / cfg.sample_stride)
        .map(|k| pilotwave::TrajectoryRecord::sample_time(k, cfg.sample_stride, cfg.grid.dt))
        .collect()
}

fn write_series(dir: &RunDir, stem: &str, s: &DensitySeries) -> Result<(), CliError> {
    let mut text = Vec::new();
    export::write_density(s, &mut text).map_err(|e| io(&dir.path, e))?;
    dir.write(&format!("{stem}.txt"), text)?;
    dir.write(&format!("{stem}.ppm"), export::density_heatmap(&s.densities))
}

fn window_args(w: &WindowArgs) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(t) = w.t_max {
        out.extend(["--t-max".to_string(), t.to_string()]);
    }
    if let Some(h) = w.x_half_width {
        out.extend(["--x-half-width".to_string(), h.to_string()]);
    }
    out.extend(["--x-step".to_string(), w.x_step.to_string()]);
    out
}

pub fn analytic(cli: &Cli, a: &AnalyticArgs) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let tau = cfg.params.tau_c();
    let win = window(
        &a.window,
        &cfg,
        &sample_times(&cfg),
        5.0 * tau,
        20.0 * cfg.params.lambda_c(),
    )?;
    let half_length = 0.5 * (cfg.grid.x_max - cfg.grid.x_min);
    let params = AnalyticParams::new(
        1.0,
        a.a,
        cfg.x0 - cfg.grid.midpoint(),
        half_length,
        a.modes,
        &cfg.params,
    )?;
    let mut argv = args(&["--config", "config.toml", "analytic", "--a"]);
    argv.push(a.a.to_string());
    argv.extend(["--modes".to_string(), a.modes.to_string()]);
    argv.extend(window_args(&a.window));
    let toml = cfg.to_toml();
    let dir = RunDir::create(&cli.out, "analytic", &format!("{toml}\n{}", argv.join(" ")))?;
    eprintln!("evaluating {} modes at {} times", a.modes + 1, win.times.len());
    let series = born_series_at(params, &cfg, &win.xs, &win.times)?;
    dir.write("config.toml", &toml)?;
    write_series(&dir, "density", &series)?;
    dir.manifest("analytic", &argv, &cfg.digest(), &[])?;
    finish(&dir);
    Ok(())
}

fn archive_digest(path: &Path) -> Result<String, CliError> {
    let meta = path.join(METADATA_FILE);
    let bytes = fs::read(&meta).map_err(|source| io(&meta, source))?;
    Ok(sha256_hex(&bytes))
}

fn load(path: &Path) -> Result<(EnsembleResult, String), CliError> {
    let digest = archive_digest(path)?;
    eprintln!("loading {}", path.display());
    Ok((load_ensemble(path)?, digest))
}

pub fn compare(cli: &Cli, a: &CompareArgs) -> Result<(), CliError> {
    reject_config_flags(cli, "compare")?;
    let (ens, meta_digest) = load(&a.ensemble)?;
    let cfg = ens.config.clone();
    let bandwidth = a.bandwidth.unwrap_or(cfg.params.lambda_c());
    let win = window(
        &a.window,
        &cfg,
        ens.times(),
        5.0 * cfg.params.tau_c(),
        20.0 * cfg.params.lambda_c(),
    )?;
    let mut argv = vec![
        "compare".to_string(),
        "--ensemble".to_string(),
        a.ensemble.display().to_string(),
    ];
    match a.a {
        Some(w) => argv.extend(["--a".to_string(), w.to_string()]),
        None => argv.push("--analytic-auto".to_string()),
    }
    argv.extend(["--bandwidth".to_string(), bandwidth.to_string()]);
    argv.extend(window_args(&a.window));
    let dir = RunDir::create(&cli.out, "compare", &format!("{meta_digest}\n{}", argv[3..].join(" ")))?;

    let empirical = pdf_series(&ens, bandwidth, &win.xs, &win.times)?;
    let (params, born) = match a.a {
        Some(w) => {
            let half_length = 0.5 * (cfg.grid.x_max - cfg.grid.x_min);
            let p = AnalyticParams::new(1.0, w, cfg.x0 - cfg.grid.midpoint(), half_length, 4096, &cfg.params)?;
            (p, born_series_at(p, &cfg, &win.xs, &win.times)?)
        }
        None => born_reference(&empirical, &cfg)?,
    };
    let report = compare_series(&empirical, &born)?;

    write_series(&dir, "empirical", &empirical)?;
    write_series(&dir, "analytic", &born)?;
    let mut text = Vec::new();
    export::write_report(&report, &mut text).map_err(|e| io(&dir.path, e))?;
    dir.write("report.txt", text)?;
    let summary = format!(
        "{}analytic_a = {}\nbandwidth = {}\nruns = {}\n",
        export::report_summary(&report),
        params.a,
        bandwidth,
        ens.records.len()
    );
    dir.write("summary.toml", &summary)?;
    dir.manifest(
        "compare",
        &argv,
        &ens.config_digest(),
        &[("ensemble_metadata_sha256".to_string(), meta_digest)],
    )?;
    print!("{summary}");
    finish(&dir);
    Ok(())
}

pub fn export(cli: &Cli, a: &ExportArgs) -> Result<(), CliError> {
    reject_config_flags(cli, "export")?;
    let (ens, meta_digest) = load(&a.ensemble)?;
    let cfg = ens.config.clone();
    let bandwidth = a.bandwidth.unwrap_or(cfg.params.lambda_c());
    let reach = cfg.params.c * cfg.grid.duration() + cfg.params.lambda_c();
    let win = window(&a.window, &cfg, ens.times(), cfg.grid.duration(), reach)?;
    let mut argv = vec![
        "export".to_string(),
        "--ensemble".to_string(),
        a.ensemble.display().to_string(),
    ];
    argv.extend(["--bandwidth".to_string(), bandwidth.to_string()]);
    argv.extend(window_args(&a.window));
    let dir = RunDir::create(&cli.out, "export", &format!("{meta_digest}\n{}", argv[3..].join(" ")))?;

    let mut text = String::from("# seed t x beta\n");
    for r in &ens.records {
        for ((t, x), b) in r.times.iter().zip(&r.positions).zip(&r.betas) {
            let _ = writeln!(text, "{} {t} {x} {b}", r.seed);
        }
    }
    dir.write("trajectories.txt", text)?;
    let lo = win.xs[0];
    let hi = win.xs[win.xs.len() - 1];
    dir.write(
        "trajectories.ppm",
        export::trajectory_heatmap(&ens.records, lo, hi, win.xs.len()),
    )?;
    eprintln!("estimating densities at {} times", win.times.len());
    let density = pdf_series(&ens, bandwidth, &win.xs, &win.times)?;
    write_series(&dir, "density", &density)?;
    dir.manifest(
        "export",
        &argv,
        &ens.config_digest(),
        &[("ensemble_metadata_sha256".to_string(), meta_digest)],
    )?;
    finish(&dir);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_steps_are_even_and_include_ends() {
        assert_eq!(snapshot_steps(0, 100), Vec::<usize>::new());
        assert_eq!(snapshot_steps(1, 100), vec![100]);
        assert_eq!(snapshot_steps(2, 100), vec![0, 100]);
        assert_eq!(snapshot_steps(5, 100), vec![0, 25, 50, 75, 100]);
        assert_eq!(snapshot_steps(3, 3), vec![0, 2, 3]);
    }
}
