//! Tabular classification with 1-D convolutional networks, explained by
//! layer-wise relevance propagation and two model-agnostic surrogates, with
//! attribution-driven feature selection and retraining studies.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod lrp;
pub mod network;
pub mod pipeline;
pub mod ranking;
pub mod render;
pub mod surrogate;

pub use error::{Error, Result};
