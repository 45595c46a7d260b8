//! Spiking neural network engine: IF, LIF and CUBA-LIF layers in discrete
//! time, feedforward or recurrent three-layer networks, surrogate-gradient
//! BPTT with a max-over-time cross-entropy loss, trainable per-neuron time
//! constants, and sparsity / synaptic-operation accounting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod error;
pub mod event_data;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod tensor;
pub mod training;

pub use error::{Result, SnnError};
pub use event_data::{bin_events, Dataset, Event, EventStream, SpikeRaster};
pub use network::{forward, init_weights, predict, ForwardRecord, ModelSpec, Topology, WeightSet};
pub use neuron::{decay_from_tau, step_layer, DecayParams, LayerState, NeuronKind, Threshold};
pub use tensor::Matrix;
