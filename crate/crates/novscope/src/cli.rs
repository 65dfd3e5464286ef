//! Command-line front end: dataset generation, single runs, benchmark
//! sweeps, post-hoc metric recomputation, and plot-data export. Exit codes:
//! 2 = configuration/validation, 3 = I/O or file format, 4 = numerical
//! failure. Stdout carries machine-parseable summaries; diagnostics go to
//! stderr.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_source, render_config, resolve_config, DatasetSource, RunConfig};
use crate::container::{save_checkpoint, save_dataset};
use crate::dataset::{candidate_set, ScanDataset};
use crate::error::{NovError, Result};
use crate::experiment::{
    run_benchmark, run_experiment, Arm, BenchmarkResult, RunResult, TrajectoryLog,
};
use crate::metrics::{fmt9, metrics_to_csv, MetricModels};

#[derive(Parser)]
#[command(name = "novscope", about = "Novelty-driven target-space discovery on scan datasets")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of flat `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (`--set run.budget=50`), repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set run.policy=...`.
    #[arg(long)]
    policy: Option<String>,
    /// Shorthand for `--set run.budget=...`.
    #[arg(long)]
    budget: Option<usize>,
    /// Shorthand for `--set run.master_seed=...`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for `--set dataset.path=...`.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic twin dataset and write it as an MDT1 file.
    Generate {
        /// domains | particles
        #[arg(long)]
        kind: String,
        /// Square image side (overridden by --height/--width).
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 16)]
        patch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Particle count (particles kind only).
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_std: f32,
        /// Output file path.
        #[arg(long, short, default_value = "dataset.mdt")]
        out: PathBuf,
    },
    /// Run one acquisition experiment and write its artifacts.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (created if absent).
        #[arg(long, short, default_value = "run-out")]
        out: PathBuf,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Run a policy x seed benchmark sweep.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Max concurrent arms.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recompute the metric series of a finished run directory.
    Metrics {
        /// Directory produced by `run`.
        run_dir: PathBuf,
        /// Dataset file (defaults to the dataset recorded in the run config).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Export per-panel plot-data CSVs from a benchmark directory.
    ExportPlots {
        /// Directory produced by `bench`.
        bench_dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

/// Parse argv, dispatch, and map errors to stable exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { kind, size, height, width, patch_size, seed, n, noise_std, out } => {
            cmd_generate(&kind, height.unwrap_or(size), width.unwrap_or(size), patch_size, seed, n, noise_std, &out)
        }
        Command::Run { cfg, out, force } => cmd_run(&load_config(&cfg)?, &out, force),
        Command::Bench { cfg, out, force, jobs } => cmd_bench(&load_config(&cfg)?, &out, force, jobs),
        Command::Metrics { run_dir, dataset } => cmd_metrics(&run_dir, dataset.as_deref()),
        Command::ExportPlots { bench_dir, force } => cmd_export_plots(&bench_dir, force),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            NovError::Config(format!("override `{kv}` is not of the form key=value"))
        })?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(p) = &args.policy {
        overrides.push(("run.policy".into(), p.clone()));
    }
    if let Some(b) = args.budget {
        overrides.push(("run.budget".into(), b.to_string()));
    }
    if let Some(s) = args.seed {
        overrides.push(("run.master_seed".into(), s.to_string()));
    }
    if let Some(d) = &args.dataset {
        overrides.push(("dataset.path".into(), d.display().to_string()));
    }
    resolve_config(&text, &overrides)
}

/// Create the directory if absent; refuse a non-empty one without `force`.
fn prepare_out_dir(path: &Path, force: bool) -> Result<()> {
    if path.exists() {
        if !force && fs::read_dir(path)?.next().is_some() {
            return Err(NovError::InvalidInput(format!(
                "output directory {} is not empty (use --force)",
                path.display()
            )));
        }
    } else {
        fs::create_dir_all(path)?;
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

pub fn trajectory_to_csv(log: &TrajectoryLog) -> String {
    let mut out = String::from("step,phase,index,row,col,y,score,train_ms,score_ms,total_ms\n");
    for r in &log.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            r.phase.as_str(),
            r.index,
            r.row,
            r.col,
            fmt9(r.y),
            fmt_opt(r.score),
            fmt9(r.train_ms),
            fmt9(r.score_ms),
            fmt9(r.total_ms),
        ));
    }
    out
}

pub fn dispersion_to_csv(dispersion: &[Option<f64>]) -> String {
    let mut out = String::from("step,dispersion\n");
    for (i, d) in dispersion.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_opt(*d)));
    }
    out
}

fn write_run_artifacts(dir: &Path, result: &RunResult) -> Result<()> {
    fs::write(dir.join("trajectory.csv"), trajectory_to_csv(&result.trajectory))?;
    fs::write(dir.join("metrics.csv"), metrics_to_csv(&result.metrics))?;
    fs::write(dir.join("dispersion.csv"), dispersion_to_csv(&result.dispersion))?;
    save_checkpoint(&dir.join("checkpoint.dkl"), &result.checkpoint)?;
    Ok(())
}

fn dataset_summary(ds: &ScanDataset) -> String {
    let candidates = candidate_set(ds).len();
    let range = if ds.has_map() {
        let vals: Vec<f64> = candidate_set(ds)
            .iter()
            .map(|&idx| ds.map_value(idx))
            .collect::<Result<_>>()
            .unwrap_or_default();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        format!(" map_min={} map_max={}", fmt9(lo), fmt9(hi))
    } else {
        String::new()
    };
    format!(
        "height={} width={} patch_size={} has_map={} candidates={candidates}{range}",
        ds.height(),
        ds.width(),
        ds.patch_size(),
        ds.has_map() as u8,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    kind: &str,
    height: usize,
    width: usize,
    patch_size: usize,
    seed: u64,
    n: usize,
    noise_std: f32,
    out: &Path,
) -> Result<()> {
    let source = match kind {
        "domains" => DatasetSource::Domains {
            height,
            width,
            patch_size,
            stripe_period: 16.0,
            wall_width: 3.0,
            loop_contrast: 1.0,
            noise_std,
            seed,
        },
        "particles" => DatasetSource::Particles {
            height,
            width,
            patch_size,
            n_particles: n,
            radius_lo: 3.0,
            radius_hi: 6.0,
            edge_decay: 1.5,
            noise_std,
            seed,
        },
        other => {
            return Err(NovError::InvalidInput(format!(
                "--kind must be domains|particles, got `{other}`"
            )))
        }
    };
    let ds = load_source(&source, Path::new("."))?;
    save_dataset(out, &ds)?;
    println!("generated kind={kind} path={} {}", out.display(), dataset_summary(&ds));
    Ok(())
}

fn cmd_run(cfg: &RunConfig, out: &Path, force: bool) -> Result<()> {
    prepare_out_dir(out, force)?;
    fs::write(out.join("config.resolved"), render_config(cfg))?;
    let ds = load_source(&cfg.dataset, Path::new("."))?;
    cfg.experiment.validate(candidate_set(&ds).len())?;
    let models = MetricModels::build(&ds, &cfg.experiment.metrics, cfg.experiment.master_seed)?;
    let result = run_experiment(&cfg.experiment, &ds, &models)?;
    write_run_artifacts(out, &result)?;
    println!(
        "run policy={} budget={} seed={} out={} {}",
        cfg.experiment.policy.as_str(),
        cfg.experiment.budget,
        cfg.experiment.master_seed,
        out.display(),
        dataset_summary(&ds),
    );
    Ok(())
}

pub fn summary_to_csv(bench: &BenchmarkResult) -> String {
    let mut out = String::from("policy,metric,step,median,q25,q75\n");
    for row in &bench.summary {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.policy.as_str(),
            row.metric,
            row.step,
            fmt9(row.median),
            fmt9(row.q25),
            fmt9(row.q75),
        ));
    }
    out
}

fn arm_dir_name(arm: &Arm) -> String {
    format!("{}-seed{}", arm.policy.as_str(), arm.seed)
}

fn cmd_bench(cfg: &RunConfig, out: &Path, force: bool, jobs: usize) -> Result<()> {
    prepare_out_dir(out, force)?;
    fs::write(out.join("config.resolved"), render_config(cfg))?;
    let ds = load_source(&cfg.dataset, Path::new("."))?;
    let models = MetricModels::build(&ds, &cfg.experiment.metrics, cfg.experiment.master_seed)?;
    let bench = run_benchmark(&cfg.bench_policies, &cfg.bench_seeds, &cfg.experiment, &ds, &models, jobs)?;

    let mut failures = String::from("policy,seed,error\n");
    let mut failed = 0usize;
    for arm in &bench.arms {
        let dir = out.join(arm_dir_name(arm));
        fs::create_dir_all(&dir)?;
        match &arm.outcome {
            Ok(result) => write_run_artifacts(&dir, result)?,
            Err(msg) => {
                failed += 1;
                failures.push_str(&format!(
                    "{},{},{}\n",
                    arm.policy.as_str(),
                    arm.seed,
                    msg.replace([',', '\n'], ";"),
                ));
            }
        }
    }
    fs::write(out.join("summary.csv"), summary_to_csv(&bench))?;
    fs::write(out.join("failures.csv"), failures)?;
    println!(
        "bench arms={} failed={failed} out={} {}",
        bench.arms.len(),
        out.display(),
        dataset_summary(&ds),
    );
    if failed > 0 {
        return Err(NovError::Contract(format!("{failed} benchmark arm(s) failed")));
    }
    Ok(())
}

struct TrajectoryRow {
    index: usize,
    row: usize,
    col: usize,
}

fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "step,phase,index,row,col,y,score,train_ms,score_ms,total_ms" {
        return Err(NovError::Format("unrecognized trajectory CSV header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(NovError::Format(format!("trajectory row {}: wrong field count", i + 1)));
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| NovError::Format(format!("trajectory row {}: bad integer `{s}`", i + 1)))
        };
        rows.push(TrajectoryRow { index: parse(fields[2])?, row: parse(fields[3])?, col: parse(fields[4])? });
    }
    Ok(rows)
}

fn cmd_metrics(run_dir: &Path, dataset: Option<&Path>) -> Result<()> {
    let cfg_text = fs::read_to_string(run_dir.join("config.resolved"))?;
    let mut overrides = Vec::new();
    if let Some(path) = dataset {
        overrides.push(("dataset.path".to_string(), path.display().to_string()));
    }
    let cfg = resolve_config(&cfg_text, &overrides)?;
    let ds = load_source(&cfg.dataset, Path::new("."))?;
    let candidates = candidate_set(&ds);

    // Audit the stored trajectory against the dataset before replaying.
    let rows = parse_trajectory_csv(&fs::read_to_string(run_dir.join("trajectory.csv"))?)?;
    let mut seen = std::collections::HashSet::new();
    for (i, row) in rows.iter().enumerate() {
        if row.index >= candidates.len() {
            return Err(NovError::InvalidInput(format!(
                "trajectory row {}: index {} out of range for {} candidates",
                i + 1,
                row.index,
                candidates.len()
            )));
        }
        let idx = candidates[row.index];
        if idx.row != row.row || idx.col != row.col {
            return Err(NovError::InvalidInput(format!(
                "trajectory row {}: index {} maps to ({}, {}), file says ({}, {})",
                i + 1,
                row.index,
                idx.row,
                idx.col,
                row.row,
                row.col
            )));
        }
        if !seen.insert(row.index) {
            return Err(NovError::InvalidInput(format!(
                "trajectory row {}: duplicate index {}",
                i + 1,
                row.index
            )));
        }
    }
    if rows.len() != cfg.experiment.budget {
        return Err(NovError::InvalidInput(format!(
            "trajectory has {} rows, config budget is {}",
            rows.len(),
            cfg.experiment.budget
        )));
    }

    // Surrogate metrics require the surrogate state at each step; the run is
    // deterministic, so replay it and recompute the full series.
    let models = MetricModels::build(&ds, &cfg.experiment.metrics, cfg.experiment.master_seed)?;
    let result = run_experiment(&cfg.experiment, &ds, &models)?;
    let path = run_dir.join("metrics_recomputed.csv");
    fs::write(&path, metrics_to_csv(&result.metrics))?;
    println!("metrics rows={} out={}", result.metrics.len(), path.display());
    Ok(())
}

pub const PLOT_PANELS: [(&str, &str); 7] = [
    ("target_cov", "coverage_target.csv"),
    ("patch_cov", "coverage_patch.csv"),
    ("feat_cov", "coverage_feat.csv"),
    ("mae", "mae.csv"),
    ("surrogate_mean", "surrogate_mean.csv"),
    ("surrogate_uncertainty", "surrogate_uncertainty.csv"),
    ("dispersion", "dispersion.csv"),
];

fn cmd_export_plots(bench_dir: &Path, force: bool) -> Result<()> {
    let text = fs::read_to_string(bench_dir.join("summary.csv"))?;
    let mut lines = text.lines();
    if lines.next() != Some("policy,metric,step,median,q25,q75") {
        return Err(NovError::Format("unrecognized summary CSV header".into()));
    }
    // (metric -> rows), preserving summary order.
    let mut panels: Vec<(String, Vec<String>)> = Vec::new();
    let mut n_rows = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(NovError::Format(format!("summary row `{line}`: wrong field count")));
        }
        let metric = fields[1].to_string();
        let row = format!("{},{},{},{},{}\n", fields[0], fields[2], fields[3], fields[4], fields[5]);
        match panels.iter_mut().find(|(m, _)| *m == metric) {
            Some((_, rows)) => rows.push(row),
            None => panels.push((metric, vec![row])),
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(NovError::InvalidInput("summary.csv has no data rows".into()));
    }
    let plots = bench_dir.join("plots");
    prepare_out_dir(&plots, force)?;
    for (metric, filename) in PLOT_PANELS {
        let mut out = String::from("policy,step,median,q25,q75\n");
        if let Some((_, rows)) = panels.iter().find(|(m, _)| m == metric) {
            for row in rows {
                out.push_str(row);
            }
        }
        fs::write(plots.join(filename), out)?;
    }
    println!("export-plots panels={} rows={n_rows} out={}", PLOT_PANELS.len(), plots.display());
    Ok(())
}
