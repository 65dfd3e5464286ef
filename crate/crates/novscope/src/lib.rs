//! Active-learning benchmark suite for autonomous microscopy at desk scale.
//!
//! The library provides a digital-twin measurement oracle over 2-D scan
//! datasets, a deep-kernel Gaussian-process surrogate (small ConvNet feature
//! extractor + exact GP, trained jointly by marginal likelihood), three
//! acquisition policies (Expected Improvement, Maximum Uncertainty, and the
//! BEACON elite-set novelty score driven by Thompson sampling), a monitoring
//! metric suite (learning curves and patch/feature/target-space coverage),
//! and an experiment loop that runs multi-seed, multi-policy sweeps with
//! fully deterministic seeding.
//!
//! See the `examples/` directory for runnable entry points per capability,
//! or the `novscope` binary for the file-based CLI.

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod extractor;
pub mod gp;
pub mod kmeans;
pub mod metrics;
pub mod pca;
pub mod projection;
pub mod seeding;
pub mod train;

pub use dataset::{CandidateIndex, Patch, ScanDataset};
pub use error::{NovError, Result};
pub use experiment::{run_benchmark, run_experiment, BenchmarkResult, TrajectoryLog};
pub use gp::{KernelHyperparams, Posterior, SurrogateState};
