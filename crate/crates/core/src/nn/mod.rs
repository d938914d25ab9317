//! Minimal neural-network toolkit: layers with explicit forward caches and
//! hand-written backward passes, Adam, and global-norm gradient clipping.
//!
//! Sequences are `T x C` [`Matrix`](crate::Matrix) values, one row per frame.
//! Every layer preserves `T`.

mod adam;
mod conv1d;
mod conv2d;
mod gemm;
mod gru;
mod highway;
mod linear;
mod norm;
mod ops;
mod param;
mod pool;

pub use adam::{clip_grad_norm, grad_norm, Adam, AdamState};
pub use conv1d::{Conv1d, ConvBank, ConvBankCache};
pub use conv2d::{Conv2d, Conv2dCache, FeatureMap};
pub use gemm::sgemm;
pub use gru::{BiGru, BiGruCache, Gru, GruCache};
pub use highway::{Highway, HighwayCache};
pub use linear::Linear;
pub use norm::{ChannelNorm, ChannelNormCache};
pub use ops::{relu_backward, relu_inplace, sigmoid, softmax_rows, tanh};
pub use param::{export_params, import_params, param_count, zero_grad, Module, NamedTensor, Param};
pub use pool::{max_pool2_backward, max_pool2_forward};
pub(crate) use param::{visit_child, visit_child_mut};

/// Seeded generator used for initialisation and data order.
pub type Rng = rand_chacha::ChaCha8Rng;
