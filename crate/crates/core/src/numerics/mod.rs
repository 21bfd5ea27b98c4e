//! Numeric substrate: matrices, losses, optimizer, randomness, gradient checks.

mod adam;
mod gradcheck;
mod init;
mod loss;
mod matrix;
mod params;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_gradcheck, GradcheckReport};
pub use init::glorot_uniform;
pub use loss::{argmax, one_hot_index, sigmoid, sigmoid_bce, softmax_rows, softmax_xent};
pub use matrix::{affine_forward, gemm, Matrix, Trans};
pub use params::ParamSet;
pub use rng::{sample_half_normal, RngStream};
