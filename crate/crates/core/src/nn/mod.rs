//! A small deterministic neural-network core in double precision.
//!
//! Models are stored as a flat weight vector with a parallel trainable mask;
//! layer parameters are contiguous slices of it. Three topologies cover the
//! architectures used here:
//!
//! * [`Topology::Feedforward`]: a stack of dense layers over one row.
//! * [`Topology::SequenceToOne`]: LSTM layers over a sequence, then dense
//!   layers on the final hidden state.
//! * [`Topology::SequenceToSequence`]: an LSTM encoder whose final hidden
//!   state is fed at every step into an LSTM decoder, followed by dense layers
//!   applied per step.

mod adam;
mod dense;
mod gradcheck;
mod layer;
mod lstm;
mod model;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{check_gradient, GradientCheck};
pub use layer::{param_count, Activation, LayerKind, LayerSpec, Topology};
pub use lstm::{lstm_step, LstmParams, LstmState};
pub use model::{ForwardTrace, InputScaling, ModelBundle, TrainMeta};
