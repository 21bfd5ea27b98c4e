//! Scene classifiers (MLP baseline, Relation Network, linear+RN), the
//! `|UB|` block analysis and parameter checkpoints.

mod checkpoint;
mod disentangle;
mod mlp;
mod rn;
mod scene_model;
mod ub;

pub use checkpoint::{Checkpoint, TensorShape, CHECKPOINT_FORMAT_VERSION};
pub use disentangle::{
    disentangle_forward, linear_rn_backward, linear_rn_forward, LinearRnCache, LinearRnSpec,
};
pub use mlp::{mlp_backward, mlp_forward, MlpCache, MlpSpec};
pub use rn::{rn_backward, rn_forward, RnCache, RnSpec};
pub use scene_model::{Loss, SceneModel};
pub use ub::{block_score, random_ub_baseline, ub_block_score, ub_product, UbReport};
