//! Run configuration, training and evaluation loops, metrics and
//! checkpoints.

mod check;
mod checkpoint;
mod config;
mod metrics;
mod train;

pub use check::{fixture_conversation, model_gradcheck};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use config::{CurriculumConfig, PathsConfig, RunConfig};
pub use metrics::{compute_metrics, EvalReport};
pub use train::{
    check_compatible, epoch_plans, evaluate, evaluate_store, mean_classification_loss, predict,
    train, train_seeds, DevSummary, EpochLog, MultiSeedReport, RunData, SeedResult, TrainLog,
    TrainOutcome,
};
