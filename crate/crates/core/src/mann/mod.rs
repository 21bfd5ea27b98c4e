//! Episodic one-shot learning with an LSTM controller and an external
//! memory read by cosine similarity and written least-recently-used first.

mod episode;
mod instance;
mod lstm;
mod memory;
mod model;

pub use episode::{build_episode, Episode, EpisodeStep};
pub use instance::{instance_accuracy, perfect_memory_predictions, InstanceCurve};
pub use lstm::{lstm_step, lstm_step_backward, LstmCache, LstmSpec, LstmState};
pub use memory::{
    cosine, cosine_read, least_used, lrua_write, write_weights, MemoryState, INITIAL_CELL,
    NORM_FLOOR,
};
pub use model::{
    mann_batch_grad, mann_episode_forward, mann_episode_grad, mann_resume, EpisodeOutput,
    MannConfig, MannState, Preprocessor,
};
