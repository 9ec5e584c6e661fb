//! Simulator and verification toolkit for spiking self-attention.
//!
//! The crate is organised bottom-up:
//!
//! * [`spike`]: LIF dynamics, Bernoulli rate coding, spike containers.
//! * [`circuits`]: coincidence products, the Taylor-series exponential,
//!   ReLU via LIF, the inhibition normalizer and the composite spike softmax.
//! * [`attention`]: Spikformer-style spiking self-attention, the circuit
//!   attention block and the exact float reference.
//! * [`analysis`]: spike-count bounds, energy, timestep rule, effective
//!   dimension, Lipschitz estimation and log-log scaling fits.
//! * [`harness`]: seeded experiment runners that emit CSV/JSON tables.

pub mod analysis;
pub mod attention;
pub mod circuits;
pub mod error;
pub mod harness;
pub mod spike;

pub use error::{Error, Result};

/// Dense real matrix used for inputs, weights and rate views.
pub type Matrix = nalgebra::DMatrix<f64>;
