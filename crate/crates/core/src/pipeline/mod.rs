//! Training, closed-loop planning, evaluation and the ablation harness.

mod bundle;
mod config;
mod eval;
mod plan;
pub mod run;
mod train;
mod window;

pub use bundle::{Generator, TrainedBundle};
pub use config::{AblationMode, ConditionSource, TrainConfig};
pub use eval::{
    ablation_suite, evaluate, evaluate_policy, mean_stderr, rollout, rollout_policy, seed_list,
    AblationReport, AblationRow, EvalReport, RolloutStats,
};
pub use plan::{plan_step, PlanOutput, Planner, TARGET_RETURN};
pub use train::{
    train, train_generator, EpochRecord, FrequencyShiftLog, GeneratorOutcome, TrainOutcome,
};
pub use window::{fit_state_normalizer, history_before, window_dataset, HistoryQueue, Window, WindowSet};
