//! Normalization by a pool of LIF neurons under global inhibition.
//!
//! `n` excitatory neurons receive rate-coded inputs `e_i`. A global
//! inhibitory interneuron integrates the pool activity of the previous step,
//! `I_inh(t) = (1/n)·Σ_j s_j(t−1)`, and while it fires the excitatory
//! synapses are shut ([`Inhibition::Veto`]). Because the veto depends only on
//! the past, each neuron's output is its input thinned by a factor shared
//! by the whole pool, so `E[count_i] ∝ e_i` and the readout
//! `α̂_i = count_i / Σ_j count_j` estimates `e_i / Σ_j e_j` without bias.
//! Rates are read after discarding a transient of `T0` steps.
//!
//! [`Inhibition::Subtractive`] instead subtracts the inhibitory current
//! from every membrane. Its saturating rate response sharpens the ratios
//! (winner-take-more) and it is kept only for comparison.

use serde::{Deserialize, Serialize};

use super::estimate::CircuitEstimate;
use super::relay_weight;
use crate::error::{Error, Result};
use crate::spike::{LifParams, LifState, SpikeTrain};

/// `⌈8·ln n⌉`.
pub fn default_transient(n: usize) -> usize {
    (8.0 * (n as f64).ln()).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inhibition {
    /// Interneuron spikes gate the excitatory synapses.
    #[default]
    Veto,
    /// `(1/n)·Σ s_j(t−1)` subtracted from each membrane directly.
    Subtractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtaConfig {
    pub channels: usize,
    pub steps: usize,
    /// Steps discarded before reading rates.
    pub transient: usize,
    pub inhibition: Inhibition,
}

impl WtaConfig {
    pub fn new(channels: usize, steps: usize, transient: usize) -> Result<Self> {
        if channels < 2 {
            return Err(Error::domain(format!(
                "normalizer needs at least 2 channels, got {channels}"
            )));
        }
        if steps <= transient {
            return Err(Error::domain(format!(
                "timesteps ({steps}) must exceed the transient ({transient})"
            )));
        }
        Ok(WtaConfig {
            channels,
            steps,
            transient,
            inhibition: Inhibition::Veto,
        })
    }

    /// Config with the default transient `⌈8·ln n⌉`.
    pub fn with_default_transient(channels: usize, steps: usize) -> Result<Self> {
        Self::new(channels, steps, default_transient(channels.max(2)))
    }

    pub fn with_inhibition(mut self, inhibition: Inhibition) -> Self {
        self.inhibition = inhibition;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtaReadout {
    /// Normalized rates `α̂_i`; the values sum to one. Each estimate counts
    /// the spikes of its own excitatory neuron.
    pub alphas: Vec<CircuitEstimate>,
    /// Firing rate of each excitatory neuron after the transient.
    pub rates: Vec<f64>,
    pub inhibitory_spikes: u64,
}

impl WtaReadout {
    /// Spike events generated by the pool and the interneuron.
    pub fn spikes_used(&self) -> u64 {
        self.alphas.iter().map(|a| a.spikes_used).sum::<u64>() + self.inhibitory_spikes
    }

    /// Index of the largest `α̂`; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, a) in self.alphas.iter().enumerate() {
            if a.value > self.alphas[best].value {
                best = i;
            }
        }
        best
    }
}

/// Simulates the normalizer on `inputs` (one rate-coded train per channel,
/// each `cfg.steps` long).
pub fn wta_normalize(inputs: &[SpikeTrain], cfg: &WtaConfig, params: &LifParams) -> Result<WtaReadout> {
    if inputs.len() != cfg.channels {
        return Err(Error::domain(format!(
            "config expects {} channels, got {} input trains",
            cfg.channels,
            inputs.len()
        )));
    }
    if let Some(bad) = inputs.iter().position(|t| t.len() != cfg.steps) {
        return Err(Error::domain(format!(
            "input train {bad} has {} timesteps, expected {}",
            inputs[bad].len(),
            cfg.steps
        )));
    }
    if inputs.iter().all(|t| t.count() == 0) {
        return Err(Error::degenerate("all normalizer inputs are silent"));
    }

    let n = cfg.channels;
    let weight = relay_weight(params);
    let mut neurons = vec![LifState::default(); n];
    let mut inter = LifState::default();
    let mut counts = vec![0u64; n];
    let mut totals = vec![0u64; n];
    let mut inhibitory_spikes = 0u64;
    let mut active_prev = 0usize;

    for t in 0..cfg.steps {
        let word = t / 64;
        let bit = t % 64;
        let pool_mean = active_prev as f64 / n as f64;
        let mut active = 0usize;
        match cfg.inhibition {
            Inhibition::Veto => {
                let veto = inter.advance(weight * pool_mean, params);
                inhibitory_spikes += u64::from(veto);
                for (i, neuron) in neurons.iter_mut().enumerate() {
                    let input = inputs[i].words()[word] >> bit & 1 == 1;
                    let drive = if input && !veto { weight } else { 0.0 };
                    if neuron.advance(drive, params) {
                        active += 1;
                        totals[i] += 1;
                        if t >= cfg.transient {
                            counts[i] += 1;
                        }
                    }
                }
            }
            Inhibition::Subtractive => {
                for (i, neuron) in neurons.iter_mut().enumerate() {
                    let input = inputs[i].words()[word] >> bit & 1 == 1;
                    let drive = if input { 1.0 } else { 0.0 } - pool_mean;
                    if neuron.advance(drive, params) {
                        active += 1;
                        totals[i] += 1;
                        if t >= cfg.transient {
                            counts[i] += 1;
                        }
                    }
                }
            }
        }
        active_prev = active;
    }

    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::degenerate(
            "no output spikes after the transient; increase the timestep count",
        ));
    }
    let window = (cfg.steps - cfg.transient) as f64;
    let alphas = counts
        .iter()
        .zip(&totals)
        .map(|(&c, &spikes)| {
            let a = c as f64 / total as f64;
            CircuitEstimate::new(a, (a * (1.0 - a) / total as f64).sqrt(), spikes)
        })
        .collect();
    Ok(WtaReadout {
        alphas,
        rates: counts.iter().map(|&c| c as f64 / window).collect(),
        inhibitory_spikes,
    })
}
