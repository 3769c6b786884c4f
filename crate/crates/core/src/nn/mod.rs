//! Hand-differentiated mapping models.
//!
//! Three architectures map a `seq_len × input_dim` phrase matrix to an
//! `output_dim` point: a linear map of the flattened phrase, a multi-window
//! CNN with max-pooling and a projection, and a bidirectional LSTM with a
//! projection. Every parameter has an exact analytic gradient.

mod adam;
mod cnn;
mod linear;
mod lstm;
mod model;
mod ops;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use model::{Architecture, ForwardPass, Gradients, MappingModel, Readout, Variant};
pub use tensor::{ParamSet, Tensor2D};
