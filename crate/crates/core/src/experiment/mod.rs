//! Configuration-driven experiments producing tabular results.

mod config;
mod features;
mod record;
mod runners;

pub use config::{
    load_config, CvConfig, ExperimentConfig, ExperimentKind, ModelConfig, NoiseConfig, OpticsConfig, RankConfig,
    SweepConfig, TaskConfig, DEFAULT_MAX_FEATURE_DIM,
};
pub use features::{shot_noise, FeatureTerms};
pub use record::{
    aggregate, read_results, read_tables, write_results, AggregateRow, FitRow, MetricRow, ResultRecord, RngProvenance,
};
pub use runners::{
    load_task, run, run_classify, run_noise_sweep, run_photon_scaling_accuracy, run_rank_scaling, EncodedTask,
};
