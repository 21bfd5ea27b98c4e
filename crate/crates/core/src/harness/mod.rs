//! Experiment orchestration: configs, splits, training loops, evaluation
//! and metrics files.

mod config;
mod gradcheck;
mod metrics;
mod oneshot;
mod scene;
mod split;
mod ub;

pub use config::{MlpSizing, ModelKind, Task, TrainConfig};
pub use gradcheck::{run_gradcheck, GradcheckTarget};
pub use metrics::{metrics_csv, parse_metrics, write_metrics, MetricsRecord, METRICS_HEADER};
pub use oneshot::{
    evaluate_one_shot, make_episodes, mann_config, memorize_episode, one_shot_pools,
    train_episodes, train_one_shot, EpisodeSource, OneShotEval, OneShotMetadata, OneShotRun,
    MAX_INSTANCE,
};
pub use scene::{
    eval_unseen, evaluate, evaluate_checkpoint, load_scene_checkpoint, loss_for,
    read_scene_checkpoint, scene_inputs, task_dataset, train_scene_classifier, EvalReport, SceneMetadata,
    SceneRun,
};
pub use split::{split_dataset, split_indices};
pub use ub::{block_mass_csv, run_ub_analysis, run_ub_analysis_seeded};
