//! A small benchmark sweep: three policies x three seeds on a shared twin,
//! summarized as per-step medians.

use novscope::acquisition::Policy;
use novscope::dataset::generate_synthetic_domains;
use novscope::experiment::{
    run_benchmark, AcquisitionConfig, ExperimentConfig, SurrogateConfig,
};
use novscope::metrics::{MetricModels, MetricsConfig};

fn main() {
    let dataset = generate_synthetic_domains(40, 40, 8, 12.0, 2.0, 1.0, 0)
        .unwrap()
        .with_noise_std(0.05)
        .unwrap();
    let base = ExperimentConfig {
        policy: Policy::Beacon,
        budget: 40,
        n_seed: 6,
        master_seed: 0,
        surrogate: SurrogateConfig {
            c1: 2,
            c2: 4,
            latent_dim: 2,
            initial_iterations: 20,
            iterations: 4,
            step_size: 0.01,
            cold_start: false,
        },
        acquisition: AcquisitionConfig::default(),
        metrics: MetricsConfig { clusters: 20, bins: 10, projection_dim: 16 },
        dispersion_window: 10,
    };
    let models = MetricModels::build(&dataset, &base.metrics, base.master_seed).unwrap();

    let policies = [Policy::Ei, Policy::Mu, Policy::Beacon];
    let bench = run_benchmark(&policies, &[0, 1, 2], &base, &dataset, &models, 1).unwrap();

    println!("median coverage at the final step (3 seeds):");
    println!("policy  patch   feature target");
    for policy in policies {
        let at = |metric: &str| {
            bench
                .summary
                .iter()
                .find(|r| r.policy == policy && r.metric == metric && r.step == base.budget)
                .map(|r| r.median)
                .unwrap()
        };
        println!(
            "{:7} {:.3}   {:.3}   {:.3}",
            policy.as_str(),
            at("patch_cov"),
            at("feat_cov"),
            at("target_cov"),
        );
    }
}
