//! Spiking substrate: LIF dynamics, rate coding, spike containers and seeds.

pub mod encoding;
pub mod lif;
pub mod rng;
pub mod tensor;
pub mod train;

pub use encoding::{
    chernoff_bound, concentration_horizon, concentration_trial, decode_rate, encode_matrix,
    encode_rate, ConcentrationHorizon, ConcentrationReport, TailEstimate,
};
pub use lif::{lif_step, LifParams, LifState};
pub use rng::{content_hash, RngSeed};
pub use tensor::SpikeTensor;
pub use train::SpikeTrain;
