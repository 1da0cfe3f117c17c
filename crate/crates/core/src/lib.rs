//! Fully-convolutional surface-material classification from haptic
//! acceleration spectrograms and texture images.

pub mod bench;
pub mod builder;
pub mod dataset;
pub mod error;
pub mod haptic;
pub mod inference;
pub mod layer;
pub mod network;
pub mod ops;
pub mod optim;
pub mod sliding;
pub mod tensor;
pub mod visual;
pub mod weights;

pub use bench::{bench, bench_threaded, BenchReport};
pub use builder::{
    build, build_fusion_head, build_hapticnet, build_visualnet, build_visualnet_tcnn, import_alexnet_conv_weights,
    receptive_field, BuildOptions, ImportOutcome, NetKind, ReceptiveFieldInfo,
};
pub use error::{Error, Result};
pub use inference::{
    argmax_labels, classify_fused, classify_haptic, classify_image, max_vote, FeatureTap, FusionLayer, FusionModel,
    PredictionGrid, VoteResult,
};
pub use layer::{ConvSpec, LayerKind, LayerSpec, LrnParams, NetworkSpec, PoolSpec};
pub use network::{ConvParams, Gradients, InitScheme, Mode, Network, Tape};
pub use optim::{AdamConfig, AdamState, LrSchedule};
pub use sliding::SlidingWindowOracle;
pub use tensor::{Scalar, Tensor};
pub use weights::WeightFile;
