//! The three coverage metrics in isolation: build the frozen cluster/bin
//! models for a dataset, then watch coverage grow along a random
//! acquisition order.

use novscope::dataset::{candidate_set, generate_synthetic_domains};
use novscope::metrics::{cluster_coverage, target_coverage, MetricModels, MetricsConfig};
use novscope::seeding::labeled_rng;

fn main() {
    let dataset = generate_synthetic_domains(48, 48, 12, 14.0, 3.0, 1.0, 0).unwrap();
    let cfg = MetricsConfig { clusters: 30, bins: 15, projection_dim: 32 };
    let models = MetricModels::build(&dataset, &cfg, 0).unwrap();
    let truth = models.truth.as_ref().unwrap();
    let bins = models.bin_model.as_ref().unwrap();
    println!(
        "{} candidates, {} patch clusters, {} reachable target bins",
        candidate_set(&dataset).len(),
        models.patch_clusters.centroids.len(),
        bins.reachable_count,
    );

    let mut rng = labeled_rng(7, "example-order");
    let n = truth.len();
    let order = rand::seq::index::sample(&mut rng, n, n).into_vec();

    println!("step patch  feature target");
    let mut acquired = Vec::new();
    let mut acquired_truth = Vec::new();
    for (t, &i) in order.iter().enumerate() {
        acquired.push(i);
        acquired_truth.push(truth[i]);
        let step = t + 1;
        if step.is_power_of_two() || step == n {
            println!(
                "{step:4} {:.3}  {:.3}   {:.3}",
                cluster_coverage(&models.patch_clusters, &acquired).unwrap(),
                cluster_coverage(&models.feat_clusters, &acquired).unwrap(),
                target_coverage(bins, &acquired_truth).unwrap(),
            );
        }
    }
}
