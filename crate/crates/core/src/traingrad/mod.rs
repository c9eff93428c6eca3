//! Reverse-mode training of spiking sequence models on the parallel path.
//!
//! The tape records the FFT convolution, the reset scan (as a constant), the
//! spike threshold with its surrogate derivative, and the dense glue around
//! them. Networks are built from [`model`] pieces and fitted with [`train`].

mod checkpoint;
mod data;
mod gradcheck;
mod model;
mod optim;
mod surrogate;
mod tape;
mod tensor;
mod train;

pub use checkpoint::{Checkpoint, CheckpointEntry};
pub use data::{impulse_task, Dataset};
pub use gradcheck::{sdtcm_gradient_check, GradCheckConfig, GradCheckReport};
pub use model::{
    readout, sdtcm_forward, Architecture, BlockMode, ForwardPass, Layer, Linear, Model,
    ModelConfig, NeuronKind, ParamGroup, PrfLayer, SdTcmBlock,
};
pub use optim::AdamW;
pub use surrogate::{surrogate_grad, SurrogateSpec};
pub use tape::{Gradients, SpikeMode, Tape, Threshold, Var};
pub use tensor::Tensor;
pub use train::{evaluate, train, train_step, EpochMetrics, TrainConfig};
