//! Online interactive training.

mod checkpoint;
mod degrade;
mod rollout;
mod schedule;
mod trainer;

pub use checkpoint::{load_model, Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use degrade::{degrade_mask, DegradeParams, Degradation};
pub use rollout::{build_online_sample, build_with_rounds, OnlineSample, RolloutConfig, TrainingSample, MAX_PRIOR_ROUNDS};
pub use schedule::OptimizerSchedule;
pub use trainer::{train, StepLog, Trainer, TrainingConfig, DEFAULT_CHECKPOINT_EVERY};
