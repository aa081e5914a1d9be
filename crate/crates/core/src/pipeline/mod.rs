//! Synthetic end-to-end experiment: a linear generator stand-in, the
//! rejection-sampling baseline, and the diversity / retention comparison
//! against box-resampled latents.

mod experiment;
mod generator;
mod metrics;

pub use experiment::{
    baseline_collect, baseline_draws, baseline_noise, run_comparison, run_experiment,
    stack_batches, BaselineOutcome, CategoryReport, ExperimentConfig, ExperimentReport,
    ExperimentRun, DEFAULT_MODEL_SEED,
};
pub use generator::{
    load_labeler, save_labeler, synth_generate, synthetic_models, GeneratorSpec,
    SYNTHETIC_AGE_MEAN, SYNTHETIC_AGE_STD,
};
pub use metrics::{
    mean_pairwise_distance, metric_by_name, render_batch, retention_rate, Cosine, Distance,
    Euclidean, Manhattan, METRIC_NAMES,
};
