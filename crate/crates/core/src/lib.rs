//! Relational-reasoning workbench.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense matrices, losses, Adam, seeded RNG streams and a
//!   finite-difference gradient checker.
//! * [`scenegen`]: relation graphs over object types, class pools, the scene
//!   generative process, datasets on disk and the entangling permutation.
//! * [`models`]: MLP baseline, Relation Network, the linear disentangling
//!   layer and the `|UB|` block-structure score.
//! * [`mann`]: LSTM controller with cosine-read / least-recently-used-write
//!   external memory for episodic one-shot classification.
//! * [`harness`]: configs, splits, training loops, evaluation and metrics.
//!
//! Batch-level work (per-scene forward/backward, dataset generation, episode
//! batches) runs on rayon when the `parallel` feature is enabled and an
//! [`Exec::Parallel`] mode is requested; results are always reduced in index
//! order so both modes produce bit-identical numbers.

pub mod error;
pub mod harness;
pub mod mann;
pub mod models;
pub mod numerics;
pub mod par;
pub mod scenegen;

pub use error::{Error, Result};
pub use par::Exec;
