//! One novelty-driven acquisition run end to end: seed sampling, per-step
//! retraining, scoring, measurement, and the coverage it achieves.

use novscope::acquisition::Policy;
use novscope::dataset::generate_synthetic_domains;
use novscope::experiment::{
    run_experiment, AcquisitionConfig, ExperimentConfig, SurrogateConfig,
};
use novscope::metrics::{MetricModels, MetricsConfig};

fn main() {
    let dataset = generate_synthetic_domains(48, 48, 12, 14.0, 3.0, 1.0, 1)
        .unwrap()
        .with_noise_std(0.05)
        .unwrap();

    let config = ExperimentConfig {
        policy: Policy::Beacon,
        budget: 60,
        n_seed: 8,
        master_seed: 0,
        surrogate: SurrogateConfig {
            c1: 2,
            c2: 4,
            latent_dim: 2,
            initial_iterations: 30,
            iterations: 5,
            step_size: 0.01,
            cold_start: false,
        },
        acquisition: AcquisitionConfig::default(),
        metrics: MetricsConfig { clusters: 25, bins: 12, projection_dim: 32 },
        dispersion_window: 10,
    };

    let models = MetricModels::build(&dataset, &config.metrics, config.master_seed).unwrap();
    let result = run_experiment(&config, &dataset, &models).unwrap();

    println!("step phase  (row,col)      y        score");
    for r in result.trajectory.records.iter().rev().take(5).rev() {
        println!(
            "{:4} {:6} ({:3},{:3}) {:9.4} {}",
            r.step,
            r.phase.as_str(),
            r.row,
            r.col,
            r.y,
            r.score.map(|s| format!("{s:9.4}")).unwrap_or_default(),
        );
    }
    let last = result.metrics.len() - 1;
    println!(
        "final coverage: patch={:.3} feature={:.3} target={:.3}, MAE={:.4}",
        result.metrics.patch_cov[last].unwrap(),
        result.metrics.feat_cov[last].unwrap(),
        result.metrics.target_cov[last].unwrap(),
        result.metrics.mae[last].unwrap(),
    );
}
