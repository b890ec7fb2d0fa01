//! Training loop, hierarchical schedule execution, metrics, repeated-split
//! experiments, ablation sweeps and attention export.

mod config;
mod export;
mod metrics;
mod multirun;
mod train;

pub use config::{Ablation, TrainConfig};
pub use export::{export_attention, AttentionExport, AttentionRow, AttentionTable};
pub use metrics::{mean_std, MetricsReport};
pub use multirun::{ablation_sweep, multi_run, run_once, MeanStd, MultiRunReport, RunResult, Variant, DEFAULT_SPLITS};
pub use train::{
    epoch_log_table, evaluate, evaluate_classifiers, init_model, predict_all, start_level, train, ClassifierReports,
    EpochRecord, LevelSelection, TrainOutcome, EPOCH_LOG_HEADER,
};
