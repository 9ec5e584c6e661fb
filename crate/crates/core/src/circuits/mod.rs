//! Spike circuits that compose into a spiking softmax.
//!
//! Each circuit is a pure function of its input trains, configuration and
//! seed, and reports how many spike events it generated so that experiments
//! can account for the total spike budget.

mod coincidence;
mod estimate;
mod exp;
mod inner_product;
mod relu;
mod softmax;
mod wta;

pub use coincidence::coincidence_product;
pub use estimate::CircuitEstimate;
pub use exp::{exp_circuit, exp_readout, ExpCircuitConfig, ExpReadout};
pub use inner_product::inner_product_circuit;
pub use relu::{relu_circuit, RELU_THRESHOLD};
pub use softmax::{
    softmax_from_logits, spike_softmax, ExpRange, SoftmaxConfig, SoftmaxReadout,
};
pub use wta::{default_transient, wta_normalize, Inhibition, WtaConfig, WtaReadout};

use crate::spike::LifParams;

/// Synaptic weight that turns a LIF neuron into an exact relay of binary
/// input: with drive `v_th/β` per input spike the membrane only ever holds
/// `0` or `v_th/β`, so the neuron fires exactly on the input timesteps.
pub(crate) fn relay_weight(params: &LifParams) -> f64 {
    params.v_th() / params.beta()
}
