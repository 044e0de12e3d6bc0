//! Tied-weight autoencoder layers trained by per-sample SGD and stacked
//! greedily.

mod layer;
mod persist;
mod train;

pub use layer::{
    activate, gradients, loss, objective, Activation, Gradients, LayerParams, LossKind,
    CROSS_ENTROPY_EPS,
};
pub use train::{
    encode_stack, train_layer, train_stack, AutoencoderStack, StackConfig, TrainConfig,
    TrainedLayer,
};
