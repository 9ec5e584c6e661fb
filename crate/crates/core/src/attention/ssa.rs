//! Spikformer-style attention on spike tensors.
//!
//! `S^Q = SN(S^X W_Q)` and likewise for K and V, one LIF per output cell
//! with membrane state carried across timesteps. `A = (1/T)·Σ_t S^Q_t
//! (S^K_t)ᵀ` and the output layer receives the constant current
//! `A·mean_t(S^V)`, scaled per [`OutputScale`].

use serde::{Deserialize, Serialize};

use super::{AttentionOutput, AttentionWeights};
use crate::error::{Error, Result};
use crate::spike::{LifParams, LifState, SpikeTensor, SpikeTrain};
use crate::Matrix;

/// Scaling of the output-layer current `A·mean(S^V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputScale {
    /// Divide by `d_k`.
    #[default]
    PerKeyDim,
    /// Use `A·mean(S^V)` as is; saturates the output layer for large `d_k`.
    Unscaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SsaConfig {
    pub params: LifParams,
    pub output_scale: OutputScale,
}

/// Runs one LIF layer `SN(S^X W)` over all timesteps.
fn spiking_projection(s_x: &SpikeTensor, w: &Matrix, params: &LifParams) -> Result<SpikeTensor> {
    let (n, d, steps) = (s_x.rows(), s_x.cols(), s_x.steps());
    let dk = w.ncols();
    let mut trains = vec![SpikeTrain::zeros(steps); n * dk];
    let mut current = vec![0.0; dk];
    for i in 0..n {
        let mut states = vec![LifState::default(); dk];
        let row = s_x.row(i);
        for t in 0..steps {
            current.iter_mut().for_each(|c| *c = 0.0);
            for (j, train) in row.iter().enumerate().take(d) {
                if train.get(t) {
                    for (m, c) in current.iter_mut().enumerate() {
                        *c += w[(j, m)];
                    }
                }
            }
            for m in 0..dk {
                if states[m].advance(current[m], params) {
                    trains[i * dk + m].set(t, true);
                }
            }
        }
    }
    SpikeTensor::from_trains(n, dk, trains)
}

/// Spiking self-attention forward pass. `spikes_used` counts the Q, K, V
/// and output spikes; the input spikes are not included.
pub fn ssa_forward(
    s_x: &SpikeTensor,
    weights: &AttentionWeights,
    cfg: &SsaConfig,
) -> Result<AttentionOutput> {
    weights.check_input(s_x.cols())?;
    let (n, steps, dk) = (s_x.rows(), s_x.steps(), weights.key_dim());
    let s_q = spiking_projection(s_x, weights.w_q(), &cfg.params)?;
    let s_k = spiking_projection(s_x, weights.w_k(), &cfg.params)?;
    let s_v = spiking_projection(s_x, weights.w_v(), &cfg.params)?;

    let mut attention = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut hits = 0u64;
            for m in 0..dk {
                hits += s_q.train(i, m).coincidences(s_k.train(j, m))?;
            }
            attention[(i, j)] = hits as f64 / steps as f64;
        }
    }
    let mut current = &attention * s_v.rates();
    if cfg.output_scale == OutputScale::PerKeyDim {
        current /= dk as f64;
    }
    if current.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("output current is not finite"));
    }

    let mut trains = Vec::with_capacity(n * dk);
    for i in 0..n {
        for m in 0..dk {
            let mut state = LifState::default();
            let c = current[(i, m)];
            trains.push(SpikeTrain::from_bits(
                (0..steps).map(|_| state.advance(c, &cfg.params)),
            ));
        }
    }
    let out = SpikeTensor::from_trains(n, dk, trains)?;
    let spikes_used = s_q.count() + s_k.count() + s_v.count() + out.count();
    Ok(AttentionOutput {
        rates: out.rates(),
        spikes: Some(out),
        attention,
        spikes_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::{encode_matrix, RngSeed};
    use rand::Rng;

    fn random_weights(d: usize, dk: usize, gain: f64, seed: u64) -> AttentionWeights {
        let mut rng = RngSeed(seed).rng();
        let mut mk = || Matrix::from_fn(d, dk, |_, _| rng.random::<f64>() * gain / d as f64);
        AttentionWeights::new(mk(), mk(), mk()).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_everything() {
        let s_x = SpikeTensor::zeros(3, 4, 16).unwrap();
        let out = ssa_forward(&s_x, &random_weights(4, 4, 2.0, 1), &SsaConfig::default()).unwrap();
        assert_eq!(out.spikes_used, 0);
        assert!(out.attention.iter().all(|&a| a == 0.0));
        assert!(out.rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn attention_entries_are_bounded_by_key_dim() {
        let mut rng = RngSeed(2).rng();
        for seed in 0..10 {
            let x = Matrix::from_fn(5, 6, |_, _| rng.random::<f64>());
            let s_x = encode_matrix(&x, 32, RngSeed(seed)).unwrap();
            let w = AttentionWeights::new(
                Matrix::from_element(6, 3, 5.0),
                Matrix::from_element(6, 3, 5.0),
                Matrix::from_element(6, 3, 5.0),
            )
            .unwrap();
            for scale in [OutputScale::PerKeyDim, OutputScale::Unscaled] {
                let cfg = SsaConfig { output_scale: scale, ..SsaConfig::default() };
                let out = ssa_forward(&s_x, &w, &cfg).unwrap();
                assert!(out.attention.iter().all(|&a| (0.0..=3.0).contains(&a)));
                assert!(out.rates.iter().all(|&r| (0.0..=1.0).contains(&r)));
            }
        }
    }

    #[test]
    fn attention_vanishes_iff_queries_or_keys_are_silent() {
        let x = Matrix::from_element(2, 2, 1.0);
        let s_x = encode_matrix(&x, 8, RngSeed(0)).unwrap();
        let silent_keys = AttentionWeights::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let out = ssa_forward(&s_x, &silent_keys, &SsaConfig::default()).unwrap();
        assert!(out.attention.iter().all(|&a| a == 0.0));
        let out = ssa_forward(&s_x, &AttentionWeights::identity(2), &SsaConfig::default()).unwrap();
        assert!(out.attention.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn state_carries_across_timesteps() {
        // Sub-threshold input every step: fires only through accumulation.
        let s_x = SpikeTensor::from_trains(1, 1, vec![SpikeTrain::ones(8)]).unwrap();
        let w = Matrix::from_element(1, 1, 0.6);
        let s = spiking_projection(&s_x, &w, &LifParams::default()).unwrap();
        let bits: Vec<bool> = s.train(0, 0).iter().collect();
        // u: 0.6, 0.9, 1.05 fires, then 0.525−1+0.6=0.125, ...
        assert_eq!(&bits[..3], &[false, false, true]);
    }

    #[test]
    fn dimension_mismatch() {
        let s_x = SpikeTensor::zeros(2, 3, 4).unwrap();
        assert!(ssa_forward(&s_x, &AttentionWeights::identity(2), &SsaConfig::default()).is_err());
    }

    #[test]
    fn output_rates_approach_their_long_run_limit() {
        let (n, d) = (4, 6);
        let w = random_weights(d, d, 6.0, 9);
        let cfg = SsaConfig::default();
        let mut rng = RngSeed(10).rng();
        let grid = [4usize, 8, 16, 32, 64];
        let mut dists = vec![Vec::new(); grid.len()];
        for seed in 0..20u64 {
            let x = Matrix::from_fn(n, d, |_, _| rng.random::<f64>());
            let limit = ssa_forward(&encode_matrix(&x, 1 << 18, RngSeed(seed)).unwrap(), &w, &cfg)
                .unwrap()
                .rates;
            for (k, &t) in grid.iter().enumerate() {
                let r = ssa_forward(&encode_matrix(&x, t, RngSeed(seed)).unwrap(), &w, &cfg)
                    .unwrap()
                    .rates;
                dists[k].push((r - &limit).norm());
            }
        }
        let medians: Vec<f64> = dists
            .iter_mut()
            .map(|v| {
                v.sort_by(f64::total_cmp);
                (v[9] + v[10]) / 2.0
            })
            .collect();
        assert!(medians[0] > 0.0);
        assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    }
}
