//! Small training engine with hand-written backward passes: dense and Chebyshev graph
//! layers, rectifier, mean pooling, softmax cross-entropy, Adam and the warm-up/decay
//! learning-rate schedule.

mod adam;
mod cheb;
mod dense;
mod gradcheck;
mod io;
mod loss;
mod schedule;
mod tensor;

pub use adam::Adam;
pub use cheb::{ChebCache, ChebConv, ScaledLaplacian};
pub use dense::{mean_pool, mean_pool_backward, relu, relu_backward, Dense};
pub use gradcheck::{gradient_check, max_relative_error, numeric_gradient, FD_STEP};
pub use io::{load_weights, save_weights, TensorEntry, WeightManifest, WEIGHTS_FORMAT};
pub use loss::{softmax, softmax_xent};
pub use schedule::{Schedule, WARMUP_EPOCHS};
pub use tensor::{Mat, Tensor};
