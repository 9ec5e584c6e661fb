//! Spiking softmax: coincidence inner products, exponential circuits and the
//! inhibition normalizer in sequence.

use serde::{Deserialize, Serialize};

use super::estimate::CircuitEstimate;
use super::exp::{exp_circuit, ExpCircuitConfig};
use super::inner_product::inner_product_circuit;
use super::wta::{default_transient, wta_normalize, WtaConfig};
use crate::error::{Error, Result};
use crate::spike::{encode_rate, LifParams, RngSeed, SpikeTrain};

const TAG_QUERY: u64 = 0x51;
const TAG_KEY: u64 = 0x4b;
const TAG_EXP: u64 = 0xe5;
const TAG_NORM: u64 = 0x77;

/// How the exponential circuits choose their input range `[−M, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpRange {
    /// `M` is the largest attainable logit magnitude (`d_k` for rates in
    /// `[0,1]`), no shift.
    #[default]
    DotProductBound,
    /// Logits are shifted by the midpoint of their estimated range and `M`
    /// is the half-width. Softmax is shift-invariant, and the smaller `M`
    /// keeps the series weights `(2M)^j/j!` and hence the variance small.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    /// Timesteps `T` for the coincidence and exponential stages. The
    /// normalizer runs `max(T, 16) + T0` steps and discards the first `T0`.
    pub steps: usize,
    /// Relative precision target for the Taylor truncation.
    pub precision: f64,
    pub exp_range: ExpRange,
    pub params: LifParams,
}

impl SoftmaxConfig {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("timestep count must be positive"));
        }
        Ok(SoftmaxConfig {
            steps,
            precision: 1e-3,
            exp_range: ExpRange::DotProductBound,
            params: LifParams::default(),
        })
    }

    pub fn with_exp_range(mut self, range: ExpRange) -> Self {
        self.exp_range = range;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxReadout {
    /// `α̂_j`, summing to one.
    pub alphas: Vec<CircuitEstimate>,
    /// Logit estimates (inner products), when computed by this pipeline.
    pub logits: Vec<CircuitEstimate>,
    /// Exponential-circuit outputs, estimates of `e^{z_j − shift}`.
    pub exps: Vec<CircuitEstimate>,
    pub shift: f64,
    /// Exponential range bound `M`.
    pub bound: f64,
    /// Taylor order `J`.
    pub order: usize,
    /// Spike events across every stage.
    pub spikes_used: u64,
}

const MIN_CENTERED_BOUND: f64 = 1e-3;
/// Shortest normalizer readout window. With one or two readout steps the
/// inhibitory veto can silence the whole window.
const MIN_NORMALIZER_WINDOW: usize = 16;

/// Exponential and normalization stages applied to logit estimates.
///
/// `logit_bound` is the largest logit magnitude the caller can produce.
/// `key_seeds[j]` identifies key `j`; with content-derived key seeds the
/// result is exactly permutation-equivariant in the keys.
pub fn softmax_from_logits(
    logits: &[f64],
    logit_bound: f64,
    key_seeds: &[RngSeed],
    cfg: &SoftmaxConfig,
    seed: RngSeed,
) -> Result<SoftmaxReadout> {
    let n = logits.len();
    if n < 2 {
        return Err(Error::domain(format!("softmax needs at least 2 keys, got {n}")));
    }
    if key_seeds.len() != n {
        return Err(Error::domain("one key seed per logit is required"));
    }
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::domain(format!("logit {z} is not finite")));
    }

    let (shift, bound) = match cfg.exp_range {
        ExpRange::DotProductBound => (0.0, logit_bound),
        ExpRange::Centered => {
            let lo = logits.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            ((lo + hi) / 2.0, ((hi - lo) / 2.0).max(MIN_CENTERED_BOUND))
        }
    };
    let exp_cfg = ExpCircuitConfig::for_relative_precision(bound, cfg.precision, cfg.steps)?;

    let exps = logits
        .iter()
        .zip(key_seeds)
        .map(|(&z, ks)| {
            let shifted = (z - shift).clamp(-bound, bound);
            exp_circuit(shifted, &exp_cfg, seed.derive(TAG_EXP).derive(ks.0))
        })
        .collect::<Result<Vec<_>>>()?;

    // Rate-code e_j / max e into the normalizer; the common scale cancels.
    let peak = exps.iter().map(|e| e.value).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::degenerate("all exponential estimates are zero"));
    }
    let transient = default_transient(n);
    let wta_steps = cfg.steps.max(MIN_NORMALIZER_WINDOW) + transient;
    let inputs = exps
        .iter()
        .zip(key_seeds)
        .map(|(e, ks)| {
            encode_rate(
                (e.value / peak).clamp(0.0, 1.0),
                wta_steps,
                seed.derive(TAG_NORM).derive(ks.0),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let wta = wta_normalize(
        &inputs,
        &WtaConfig::new(n, wta_steps, transient)?,
        &cfg.params,
    )?;

    let spikes_used = exps.iter().map(|e| e.spikes_used).sum::<u64>()
        + inputs.iter().map(SpikeTrain::count).sum::<u64>()
        + wta.spikes_used();
    Ok(SoftmaxReadout {
        alphas: wta.alphas,
        logits: Vec::new(),
        exps,
        shift,
        bound,
        order: exp_cfg.order,
        spikes_used,
    })
}

/// Spiking estimate of `softmax(q·k_1, …, q·k_n)` for rate vectors in
/// `[0,1]^{d_k}`.
///
/// Query dimension `m` is encoded with `seed.derive(Q).derive(m)` and key
/// `j` with `seed.derive(K).derive(j)`; the reported spike count includes
/// these encodings.
pub fn spike_softmax(
    q: &[f64],
    keys: &[Vec<f64>],
    cfg: &SoftmaxConfig,
    seed: RngSeed,
) -> Result<SoftmaxReadout> {
    if keys.len() < 2 {
        return Err(Error::domain(format!("softmax needs at least 2 keys, got {}", keys.len())));
    }
    if let Some(j) = keys.iter().position(|k| k.len() != q.len()) {
        return Err(Error::domain(format!(
            "key {j} has {} dimensions, query has {}",
            keys[j].len(),
            q.len()
        )));
    }

    let q_seed = seed.derive(TAG_QUERY);
    let q_trains = q
        .iter()
        .enumerate()
        .map(|(m, &x)| encode_rate(x, cfg.steps, q_seed.derive(m as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut spikes: u64 = q_trains.iter().map(SpikeTrain::count).sum();

    let key_seeds: Vec<RngSeed> = (0..keys.len())
        .map(|j| seed.derive(TAG_KEY).derive(j as u64))
        .collect();
    let mut logits = Vec::with_capacity(keys.len());
    for (key, ks) in keys.iter().zip(&key_seeds) {
        let k_trains = key
            .iter()
            .enumerate()
            .map(|(m, &x)| encode_rate(x, cfg.steps, ks.derive(m as u64)))
            .collect::<Result<Vec<_>>>()?;
        spikes += k_trains.iter().map(SpikeTrain::count).sum::<u64>();
        let est = inner_product_circuit(&q_trains, &k_trains)?;
        spikes += est.spikes_used;
        logits.push(est);
    }

    let values: Vec<f64> = logits.iter().map(|l| l.value).collect();
    let mut out = softmax_from_logits(&values, q.len() as f64, &key_seeds, cfg, seed)?;
    out.spikes_used += spikes;
    out.logits = logits;
    Ok(out)
}
