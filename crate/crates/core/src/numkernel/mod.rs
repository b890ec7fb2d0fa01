//! Dense numeric substrate: matrices, activations, seeded randomness,
//! initialization, differentiation helpers and the Adam optimizer.

mod activation;
mod adam;
mod finite_diff;
mod init;
mod matrix;
mod params;
mod rng;
pub mod tape;

pub use activation::{elementwise, sigmoid, softmax, Activation};
pub use adam::{AdamState, DEFAULT_LEARNING_RATE};
pub use finite_diff::{finite_diff_grad, max_relative_error};
pub use init::glorot_init;
pub use matrix::Matrix;
pub(crate) use matrix::{outer_acc, vec_mat_acc, vec_mat_t_acc};
pub use params::Parameters;
pub use rng::SeededRng;
