//! Compact convolutional classifier trained from scratch with SGD.

mod gradcheck;
pub mod layers;
mod model;
mod tensor;
mod train;

pub use gradcheck::{
    gradient_check, relative_error, GradCheckEntry, GradCheckOptions, GradCheckReport,
};
pub use layers::{
    argmax, conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2,
    maxpool_backward, relu, relu_backward, softmax, softmax_cross_entropy, ConvGrads, DenseGrads,
    Filter,
};
pub use model::{ActivationPattern, ArchSpec, CompactCnn, LayerSlots, Layout, KERNEL};
pub use tensor::Tensor4;
pub use train::{accuracy, fit, predict_all, EpochMetrics, SampleSet, Sgd, TrainConfig};
