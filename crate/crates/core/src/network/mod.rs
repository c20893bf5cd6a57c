//! 1-D convolutional classifier: architecture strings, parameters, forward
//! and backward passes, training and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod spec;
pub mod train;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{
    forward, forward_batch, logits_batch, predict_batch, ForwardTrace, LayerTrace, Prediction,
};
pub use params::{init_params, InitScheme, LayerParams, Parameters};
pub use spec::{
    parse_spec, parse_spec_with, rederive_for_input, ActShape, LayerSpec, NetworkSpec, SpecOptions,
};
pub use train::{evaluate_loss, train, train_from, write_history, HistoryPoint, TrainConfig};
