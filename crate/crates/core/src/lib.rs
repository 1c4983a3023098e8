//! Memorization of random periodic spike scores in continuous-time recurrent
//! spiking networks.
//!
//! The crate is organized bottom-up:
//!
//! - [`score`]: random periodic spike trains with a refractory period, and
//!   refractory-preserving jitter.
//! - [`model`]: network topology, delays, weights and the postsynaptic kernel.
//! - [`synth`]: per-neuron weight synthesis from linear template constraints.
//! - [`sim`]: event-driven simulation with threshold noise and forced neurons.
//! - [`metrics`]: precision and recall under the best cyclic alignment.
//! - [`stability`]: small-jitter propagation and its monodromy spectrum.

pub mod error;
pub mod metrics;
pub mod model;
pub mod score;
pub mod sim;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};
pub use model::{Kernel, Network, Neuron, Synapse};
pub use score::{CountPmf, SpikeScore, SpikeTrain};
