//! Forward and backward kernels for every layer kind.

pub mod activation;
pub mod conv;
pub mod lrn;
pub mod pool;

pub use activation::{
    dropout_backward, dropout_forward, relu, relu_backward, softmax, softmax_backward, softmax_cross_entropy,
};
pub use conv::{conv_backward, conv_forward, ConvGeometry, ConvGrads};
pub use lrn::{lrn_backward, lrn_forward};
pub use pool::{avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward};
