//! The autonomous discovery loop: seed acquisition, per-step joint
//! retraining, posterior inference over the full candidate grid, policy
//! scoring, measurement, and metric logging until the budget is exhausted;
//! plus multi-seed multi-policy benchmark sweeps over a shared dataset and
//! frozen metric models.

use std::time::Instant;

use crate::acquisition::{
    beacon_score, beacon_score_latent, ei_score, mu_score, select_elite, select_next,
    thompson_sample, NoveltySpace, Policy,
};
use crate::container::Checkpoint;
use crate::dataset::{candidate_set, extract_patch, measure, seed_sample, Patch, ScanDataset};
use crate::error::{NovError, Result};
use crate::extractor::{embed, Architecture, ExtractorParams};
use crate::gp::{posterior, KernelHyperparams, SurrogateState};
use crate::metrics::{
    cluster_coverage, mae_step, surrogate_mean_step, surrogate_uncertainty_step, target_coverage,
    MetricModels, MetricSeries, MetricsConfig,
};
use crate::seeding::labeled_rng;
use crate::train::{train, TrainSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub c1: usize,
    pub c2: usize,
    pub latent_dim: usize,
    /// Descent iterations for the first training of a run.
    pub initial_iterations: usize,
    /// Descent iterations per subsequent retraining (warm-started).
    pub iterations: usize,
    pub step_size: f64,
    /// Re-initialize extractor weights at every retraining instead of
    /// warm-starting from the previous step.
    pub cold_start: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            c1: 8,
            c2: 16,
            latent_dim: 2,
            initial_iterations: 200,
            iterations: 200,
            step_size: 0.01,
            cold_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub elite_fraction: f64,
    pub k_neighbors: usize,
    pub novelty_space: NoveltySpace,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { elite_fraction: 0.2, k_neighbors: 1, novelty_space: NoveltySpace::Response }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub policy: Policy,
    pub budget: usize,
    pub n_seed: usize,
    pub master_seed: u64,
    pub surrogate: SurrogateConfig,
    pub acquisition: AcquisitionConfig,
    pub metrics: MetricsConfig,
    pub dispersion_window: usize,
}

impl ExperimentConfig {
    pub fn validate(&self, n_candidates: usize) -> Result<()> {
        if self.n_seed < 2 {
            return Err(NovError::InvalidInput("n_seed must be >= 2".into()));
        }
        if self.budget < self.n_seed {
            return Err(NovError::InvalidInput(format!(
                "budget {} smaller than n_seed {}",
                self.budget, self.n_seed
            )));
        }
        if self.budget > n_candidates {
            return Err(NovError::InvalidInput(format!(
                "budget {} exceeds search space of {n_candidates} candidates",
                self.budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Seed,
    Active,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Seed => "seed",
            Phase::Active => "active",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub phase: Phase,
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub y: f64,
    pub score: Option<f64>,
    pub train_ms: f64,
    pub score_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub records: Vec<TrajectoryRecord>,
}

/// Audit counters proving policy isolation (EI/MU runs never build elite
/// sets or draw Thompson samples).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub elite_constructions: usize,
    pub thompson_draws: usize,
    pub ei_evaluations: usize,
    pub mu_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: TrajectoryLog,
    pub metrics: MetricSeries,
    pub counters: OpCounters,
    pub checkpoint: Checkpoint,
    pub dispersion: Vec<Option<f64>>,
}

/// Mean pairwise Euclidean distance (pixels) among the last `window`
/// acquisition coordinates, per step; absent before `window` acquisitions.
pub fn spatial_dispersion(log: &TrajectoryLog, window: usize) -> Result<Vec<Option<f64>>> {
    if window < 2 {
        return Err(NovError::InvalidInput("dispersion window must be >= 2".into()));
    }
    let coords: Vec<(f64, f64)> =
        log.records.iter().map(|r| (r.row as f64, r.col as f64)).collect();
    Ok((0..coords.len())
        .map(|t| {
            if t + 1 < window {
                return None;
            }
            let w = &coords[t + 1 - window..=t];
            let mut acc = 0.0;
            let mut pairs = 0.0;
            for i in 0..w.len() {
                for j in (i + 1)..w.len() {
                    acc += ((w[i].0 - w[j].0).powi(2) + (w[i].1 - w[j].1).powi(2)).sqrt();
                    pairs += 1.0;
                }
            }
            Some(acc / pairs)
        })
        .collect())
}

struct MetricRecorder<'a> {
    models: &'a MetricModels,
    series: MetricSeries,
}

impl<'a> MetricRecorder<'a> {
    fn new(models: &'a MetricModels) -> Self {
        Self { models, series: MetricSeries::default() }
    }

    /// Coverage metrics at acquisition `step`; surrogate slots start absent.
    fn push_coverage(&mut self, step: usize, acquired: &[usize], acquired_truth: &[f64]) -> Result<()> {
        let patch_cov = cluster_coverage(&self.models.patch_clusters, acquired)?;
        let feat_cov = cluster_coverage(&self.models.feat_clusters, acquired)?;
        let target_cov = match &self.models.bin_model {
            Some(bins) => Some(target_coverage(bins, acquired_truth)?),
            None => None,
        };
        self.series.push(step, None, None, None, Some(patch_cov), Some(feat_cov), target_cov);
        Ok(())
    }

    /// Fill the surrogate learning-curve slots for acquisition `step`
    /// (surrogate trained on exactly `step` pairs).
    fn fill_surrogate(&mut self, step: usize, post_mean: &[f64], post_var: &[f64]) -> Result<()> {
        let i = self
            .series
            .steps
            .iter()
            .position(|&s| s == step)
            .ok_or_else(|| NovError::Contract(format!("no metric row for step {step}")))?;
        self.series.mae[i] = match &self.models.truth {
            Some(truth) => Some(mae_step(post_mean, truth)?),
            None => None,
        };
        self.series.surrogate_mean[i] = Some(surrogate_mean_step(post_mean));
        self.series.surrogate_uncertainty[i] = Some(surrogate_uncertainty_step(post_var));
        Ok(())
    }
}

/// Run Algorithm-1-style acquisition under one policy. Fully deterministic
/// given (config, dataset, master seed); metric models must be built over
/// this dataset.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &ScanDataset,
    models: &MetricModels,
) -> Result<RunResult> {
    let candidates = candidate_set(dataset);
    let n_cand = candidates.len();
    config.validate(n_cand)?;

    let arch = Architecture::new(
        dataset.patch_size(),
        config.surrogate.c1,
        config.surrogate.c2,
        config.surrogate.latent_dim,
    )?;

    // All candidate patches, standardized once.
    let patches: Vec<Patch> = candidates
        .iter()
        .map(|&idx| extract_patch(dataset, idx, true))
        .collect::<Result<_>>()?;

    let mut seed_rng = labeled_rng(config.master_seed, "seed-sample");
    let mut measure_rng = labeled_rng(config.master_seed, "measure");
    let mut thompson_rng = labeled_rng(config.master_seed, "thompson");
    let mut init_rng = labeled_rng(config.master_seed, "init");

    let mut log = TrajectoryLog::default();
    let mut counters = OpCounters::default();
    let mut recorder = MetricRecorder::new(models);
    let mut measured = vec![false; n_cand];
    let mut history: Vec<(usize, f64)> = Vec::with_capacity(config.budget);
    let mut acquired: Vec<usize> = Vec::with_capacity(config.budget);
    let mut acquired_truth: Vec<f64> = Vec::with_capacity(config.budget);

    let record_acquisition = |flat: usize,
                                  phase: Phase,
                                  score: Option<f64>,
                                  train_ms: f64,
                                  score_ms: f64,
                                  total_ms: f64,
                                  measured: &mut Vec<bool>,
                                  history: &mut Vec<(usize, f64)>,
                                  acquired: &mut Vec<usize>,
                                  acquired_truth: &mut Vec<f64>,
                                  log: &mut TrajectoryLog,
                                  measure_rng: &mut rand_chacha::ChaCha12Rng|
     -> Result<()> {
        let idx = candidates[flat];
        let y = measure(dataset, idx, measure_rng)?;
        measured[flat] = true;
        history.push((flat, y));
        acquired.push(flat);
        acquired_truth.push(dataset.map_value(idx)?);
        log.records.push(TrajectoryRecord {
            step: history.len(),
            phase,
            index: flat,
            row: idx.row,
            col: idx.col,
            y,
            score,
            train_ms,
            score_ms,
            total_ms,
        });
        Ok(())
    };

    // Seed phase.
    let seeds = seed_sample(&candidates, config.n_seed, &mut seed_rng)?;
    for idx in seeds {
        let t0 = Instant::now();
        record_acquisition(
            idx.flat,
            Phase::Seed,
            None,
            0.0,
            0.0,
            0.0,
            &mut measured,
            &mut history,
            &mut acquired,
            &mut acquired_truth,
            &mut log,
            &mut measure_rng,
        )?;
        let total_ms = t0.elapsed().as_secs_f64() * 1e3;
        log.records.last_mut().unwrap().total_ms = total_ms;
        recorder.push_coverage(history.len(), &acquired, &acquired_truth)?;
    }

    // Surrogate carried across steps (warm start unless cold_start).
    let mut extractor = ExtractorParams::init(arch, &mut init_rng);
    let mut kernel = KernelHyperparams::default();
    let mut first_training = true;

    let run_training = |extractor: &mut ExtractorParams,
                            kernel: &mut KernelHyperparams,
                            first: &mut bool,
                            history: &[(usize, f64)],
                            init_rng: &mut rand_chacha::ChaCha12Rng|
     -> Result<SurrogateState> {
        if config.surrogate.cold_start && !*first {
            *extractor = ExtractorParams::init(arch, init_rng);
            *kernel = KernelHyperparams::default();
        }
        let train_patches: Vec<Patch> = history.iter().map(|&(j, _)| patches[j].clone()).collect();
        let targets: Vec<f64> = history.iter().map(|&(_, y)| y).collect();
        let state = SurrogateState::new(extractor.clone(), kernel.clone(), train_patches, targets)?;
        let schedule = TrainSchedule {
            iterations: if *first {
                config.surrogate.initial_iterations
            } else {
                config.surrogate.iterations
            },
            step_size: config.surrogate.step_size,
            seed: config.master_seed,
            freeze_extractor: false,
        };
        *first = false;
        let trained = train(state, &schedule)?;
        *extractor = trained.extractor.clone();
        *kernel = trained.kernel;
        Ok(trained)
    };

    // Active phase.
    while history.len() < config.budget {
        let step_t0 = Instant::now();
        let n = history.len();

        let train_t0 = Instant::now();
        let state = run_training(&mut extractor, &mut kernel, &mut first_training, &history, &mut init_rng)?;
        let train_ms = train_t0.elapsed().as_secs_f64() * 1e3;

        let post = posterior(&state, &patches)?;
        recorder.fill_surrogate(n, &post.mean, &post.variance)?;

        let score_t0 = Instant::now();
        let scores = match config.policy {
            Policy::Beacon => {
                let elite = select_elite(&history, config.acquisition.elite_fraction)?;
                counters.elite_constructions += 1;
                match config.acquisition.novelty_space {
                    NoveltySpace::Response => {
                        let yhat = thompson_sample(&post, &mut thompson_rng);
                        counters.thompson_draws += 1;
                        beacon_score(&yhat, &elite, config.acquisition.k_neighbors)?
                    }
                    NoveltySpace::Latent => {
                        let cand_latents: Vec<Vec<f64>> = patches
                            .iter()
                            .map(|p| embed(&state.extractor, p))
                            .collect::<Result<_>>()?;
                        let elite_latents: Vec<Vec<f64>> = elite
                            .members
                            .iter()
                            .map(|&(j, _)| embed(&state.extractor, &patches[j]))
                            .collect::<Result<_>>()?;
                        beacon_score_latent(&cand_latents, &elite_latents, config.acquisition.k_neighbors)?
                    }
                }
            }
            Policy::Ei => {
                let best = history.iter().map(|&(_, y)| y).fold(f64::NEG_INFINITY, f64::max);
                counters.ei_evaluations += 1;
                ei_score(&post, best)
            }
            Policy::Mu => {
                counters.mu_evaluations += 1;
                mu_score(&post)
            }
        };
        let decision = select_next(&scores, &measured, config.policy)?;
        let score_ms = score_t0.elapsed().as_secs_f64() * 1e3;

        record_acquisition(
            decision.chosen,
            Phase::Active,
            Some(decision.score),
            train_ms,
            score_ms,
            0.0,
            &mut measured,
            &mut history,
            &mut acquired,
            &mut acquired_truth,
            &mut log,
            &mut measure_rng,
        )?;
        recorder.push_coverage(history.len(), &acquired, &acquired_truth)?;
        log.records.last_mut().unwrap().total_ms = step_t0.elapsed().as_secs_f64() * 1e3;
    }

    // Final metric pass: surrogate trained on all T pairs.
    let final_state =
        run_training(&mut extractor, &mut kernel, &mut first_training, &history, &mut init_rng)?;
    let post = posterior(&final_state, &patches)?;
    recorder.fill_surrogate(history.len(), &post.mean, &post.variance)?;

    let checkpoint = Checkpoint {
        arch,
        weights: final_state.extractor.weights.clone(),
        kernel: final_state.kernel,
        target_mean: final_state.target_mean,
        target_std: final_state.target_std,
        train_indices: history.iter().map(|&(j, _)| j as u32).collect(),
        train_targets: history.iter().map(|&(_, y)| y).collect(),
    };

    let dispersion = spatial_dispersion(&log, config.dispersion_window)?;

    Ok(RunResult { trajectory: log, metrics: recorder.series, counters, checkpoint, dispersion })
}

/// One (policy, seed) arm of a benchmark sweep.
#[derive(Debug, Clone)]
pub struct Arm {
    pub policy: Policy,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, String>,
}

/// Long-format per-step aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: Policy,
    pub metric: &'static str,
    pub step: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug)]
pub struct BenchmarkResult {
    pub arms: Vec<Arm>,
    pub summary: Vec<SummaryRow>,
    pub budget: usize,
}

pub const SUMMARY_METRICS: [&str; 7] = [
    "mae",
    "surrogate_mean",
    "surrogate_uncertainty",
    "patch_cov",
    "feat_cov",
    "target_cov",
    "dispersion",
];

/// Linear-interpolation quantile of already-collected values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn metric_value(run: &RunResult, metric: &str, i: usize) -> Option<f64> {
    match metric {
        "mae" => run.metrics.mae[i],
        "surrogate_mean" => run.metrics.surrogate_mean[i],
        "surrogate_uncertainty" => run.metrics.surrogate_uncertainty[i],
        "patch_cov" => run.metrics.patch_cov[i],
        "feat_cov" => run.metrics.feat_cov[i],
        "target_cov" => run.metrics.target_cov[i],
        "dispersion" => run.dispersion[i],
        _ => None,
    }
}

fn summarize(arms: &[Arm], policies: &[Policy], budget: usize) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &policy in policies {
        let runs: Vec<&RunResult> = arms
            .iter()
            .filter(|a| a.policy == policy)
            .filter_map(|a| a.outcome.as_ref().ok())
            .collect();
        if runs.is_empty() {
            continue;
        }
        for metric in SUMMARY_METRICS {
            for step in 1..=budget {
                let mut values: Vec<f64> =
                    runs.iter().filter_map(|r| metric_value(r, metric, step - 1)).collect();
                if values.is_empty() {
                    continue;
                }
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                rows.push(SummaryRow {
                    policy,
                    metric,
                    step,
                    median: quantile(&values, 0.5),
                    q25: quantile(&values, 0.25),
                    q75: quantile(&values, 0.75),
                });
            }
        }
    }
    rows
}

/// Run every (policy, seed) arm against the shared dataset and frozen
/// metric models; per-arm failures are recorded without aborting the sweep.
/// `jobs` bounds arm-level concurrency (arms own their state; outputs are
/// independent of the job count).
pub fn run_benchmark(
    policies: &[Policy],
    seeds: &[u64],
    base: &ExperimentConfig,
    dataset: &ScanDataset,
    models: &MetricModels,
    jobs: usize,
) -> Result<BenchmarkResult> {
    if policies.is_empty() || seeds.is_empty() {
        return Err(NovError::InvalidInput("benchmark needs >= 1 policy and >= 1 seed".into()));
    }
    let mut configs = Vec::new();
    for &policy in policies {
        for &seed in seeds {
            let mut cfg = *base;
            cfg.policy = policy;
            cfg.master_seed = seed;
            configs.push(cfg);
        }
    }

    let jobs = jobs.max(1).min(configs.len());
    let mut outcomes: Vec<Option<std::result::Result<RunResult, String>>> =
        (0..configs.len()).map(|_| None).collect();

    if jobs == 1 {
        for (i, cfg) in configs.iter().enumerate() {
            outcomes[i] = Some(run_experiment(cfg, dataset, models).map_err(|e| e.to_string()));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<std::sync::Mutex<Option<std::result::Result<RunResult, String>>>> =
            (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= configs.len() {
                        break;
                    }
                    let out = run_experiment(&configs[i], dataset, models).map_err(|e| e.to_string());
                    *results[i].lock().unwrap() = Some(out);
                });
            }
        });
        for (slot, cell) in outcomes.iter_mut().zip(results) {
            *slot = cell.into_inner().unwrap();
        }
    }

    let arms: Vec<Arm> = configs
        .iter()
        .zip(outcomes)
        .map(|(cfg, out)| Arm { policy: cfg.policy, seed: cfg.master_seed, outcome: out.unwrap() })
        .collect();
    let summary = summarize(&arms, policies, base.budget);
    Ok(BenchmarkResult { arms, summary, budget: base.budget })
}
