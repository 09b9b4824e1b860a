//! Clock-driven simulator of a recurrent Hodgkin-Huxley network with
//! stochastic vesicle release and spike-timing-dependent plasticity, plus
//! spike-train analysis.
//!
//! Units: mV, ms, and the membrane current scale of the neuron parameters.
//! Durations passed to [`engine::SimConfig`] and the analysis functions are
//! in seconds.

pub mod analysis;
pub mod checkpoint;
pub mod config;
pub mod engine;
pub mod error;
pub mod hh;
pub mod io;
pub mod plasticity;
pub mod rng;
pub mod synapse;
pub mod topology;

pub use config::RunConfig;
pub use engine::{ModelParams, RunSummary, SimConfig, World};
