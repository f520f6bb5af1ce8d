//! Learned quality screening of retrieved fields.
//!
//! The spectral rule catches parasitic fringes because they live in a known
//! part of frequency space, but it is blind to defects that share the
//! object's own band — broken phase regions, unwrap failures, drifted
//! backgrounds. This module trains a small convolutional network to make the
//! clean/noisy call from the field itself: six 3×3 convolution blocks with
//! max pooling, global max pooling into a 1024-wide feature vector, and a
//! three-layer head producing a single defect probability.
//!
//! Everything is self-contained and deterministic: initialization, dropout,
//! augmentation, and shuffling all derive from one master seed, gradients
//! accumulate in a fixed order, and the same seed therefore reproduces the
//! same trained weights byte for byte.

mod adam;
mod autodiff;
mod elastic;
mod io;
pub(crate) mod layers;
mod params;
mod train;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use autodiff::{backward, bce_loss, bce_loss_batch, forward_pass, ForwardCache, RunMode, PROBABILITY_FLOOR};
pub use elastic::elastic_transform;
pub use io::{read_model, write_model, write_training_log};
pub use layers::{adaptive_max_pool_1, conv2d, linear, max_pool2, relu};
pub use params::{
    init_custom_params, init_params, ConvLayer, Gradients, InputMode, LayerGrad, LinearLayer,
    NetParams, CONV_CHANNELS, INPUT_SIZE, LINEAR_DIMS,
};
pub use tensor::Tensor;
pub use train::{classify, evaluate_metrics, field_to_input, train, EpochLog, Metrics, TrainConfig};
