//! Inference and cost analysis for a band-split RNN speech-enhancement front end.
//!
//! The network maps a noisy spectrogram to a complex mask through a stack of
//! dual-path layers. Each layer runs a band RNN (across sub-bands, per frame)
//! and a time RNN (across frames, per sub-band). Three optimizations are
//! available as configuration and compose freely:
//!
//! * frame resampling of selected sublayers ([`resample`]),
//! * sub-band pruning of the time RNNs ([`prune`]),
//! * grouped recurrent layers with channel rearrangement ([`rnn`]).
//!
//! [`macs`] provides a closed-form multiply-accumulate model of any
//! configuration together with a counting forward pass that checks it.

pub mod bands;
pub mod config;
pub mod dsp;
pub mod error;
pub mod features;
pub mod linalg;
pub mod macs;
pub mod model;
pub mod prune;
pub mod resample;
pub mod rnn;
pub mod weights;

pub use config::ModelConfig;
pub use error::{Error, Result};
pub use features::SubbandFeatures;
pub use macs::{MacCounts, MacsReport};
pub use model::{Model, ModelWeights};
