//! Forward and backward forms of every layer operation in the network.
//!
//! All functions here are pure: they never cache state between calls, so
//! they can be invoked concurrently from any number of threads.

mod activation;
mod conv;
mod dense;
mod gemm;
mod pool;

pub use activation::{softmax, softmax_xent, tanh_backward, tanh_map};
pub use conv::{conv2d_backward, conv2d_naive, conv2d_valid, ConvGrads, ConvLayerParams};
pub use dense::{dense, dense_backward, DenseGrads, DenseLayerParams};
pub use pool::{maxpool, maxpool_backward, pooled_extent, ArgmaxMap};
