//! Attention block assembled from spike circuits.
//!
//! Every token gets a seed derived from a hash of its row content, and all
//! of its encodings (query, key and value trains) and every softmax it takes
//! part in are seeded from it. Reordering the tokens therefore reorders the
//! output rows bit-exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttentionOutput, AttentionWeights};
use crate::circuits::{
    coincidence_product, inner_product_circuit, softmax_from_logits, ExpRange, SoftmaxConfig,
};
use crate::error::{Error, Result};
use crate::spike::{content_hash, decode_rate, encode_rate, RngSeed, SpikeTrain};
use crate::Matrix;

const TAG_Q: u64 = 0x51;
const TAG_K: u64 = 0x4b;
const TAG_V: u64 = 0x56;
const TAG_SOFTMAX: u64 = 0x5f;
const TAG_ALPHA: u64 = 0xa1;

/// How the attention weights are applied to the values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueReadout {
    /// `Σ_j α̂_j·v̂_j` over decoded value rates.
    #[default]
    Decoded,
    /// Each `α̂_j` is rate-coded and ANDed with the value trains; the output
    /// is the summed coincidence rate.
    Coincidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitAttentionConfig {
    pub softmax: SoftmaxConfig,
    pub value_readout: ValueReadout,
}

impl CircuitAttentionConfig {
    /// Centered exponential range and relative precision `1e-4`.
    pub fn new(steps: usize) -> Result<Self> {
        let mut softmax = SoftmaxConfig::new(steps)?.with_exp_range(ExpRange::Centered);
        softmax.precision = 1e-4;
        Ok(CircuitAttentionConfig {
            softmax,
            value_readout: ValueReadout::Decoded,
        })
    }

    pub fn with_value_readout(mut self, readout: ValueReadout) -> Self {
        self.value_readout = readout;
        self
    }
}

/// Affine map `x ↦ (x − offset)/scale` bringing values into `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RateMap {
    offset: f64,
    scale: f64,
}

impl RateMap {
    fn covering<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> RateMap {
        let lo = values.clone().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo >= 0.0 && hi <= 1.0 {
            RateMap { offset: 0.0, scale: 1.0 }
        } else if hi > lo {
            RateMap { offset: lo, scale: hi - lo }
        } else {
            RateMap { offset: lo, scale: 1.0 }
        }
    }

    fn to_rate(self, x: f64) -> f64 {
        ((x - self.offset) / self.scale).clamp(0.0, 1.0)
    }

    fn invert(self, r: f64) -> f64 {
        self.offset + self.scale * r
    }
}

struct Token {
    seed: RngSeed,
    hash: u64,
    q: Vec<SpikeTrain>,
    k: Vec<SpikeTrain>,
    v: Vec<SpikeTrain>,
    /// Σ_m of the mapped query and key rates, for undoing the affine map.
    q_sum: f64,
    k_sum: f64,
}

fn encode_row(values: &[f64], map: RateMap, steps: usize, seed: RngSeed) -> Result<Vec<SpikeTrain>> {
    values
        .iter()
        .enumerate()
        .map(|(m, &x)| encode_rate(map.to_rate(x), steps, seed.derive(m as u64)))
        .collect()
}

/// Spike-circuit estimate of `softmax(QKᵀ)V` for `X ∈ [0,1]^{n×d}`.
///
/// When entries of `Q = XW_Q`, `K = XW_K` leave `[0,1]` they are mapped in by
/// one shared affine transform `x ↦ (x − a)/s`, and the logit readout undoes
/// it: `q·k = s²·q'·k' + a·s·(Σq' + Σk') + d_k·a²`. Values get their own
/// transform.
pub fn circuit_attention(
    x: &Matrix,
    weights: &AttentionWeights,
    cfg: &CircuitAttentionConfig,
    seed: RngSeed,
) -> Result<AttentionOutput> {
    weights.check_input(x.ncols())?;
    let (n, dk) = (x.nrows(), weights.key_dim());
    if n == 0 {
        return Err(Error::domain("input has no tokens"));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!(
            "entry ({}, {}) = {v} is outside [0,1]",
            i % n,
            i / n
        )));
    }
    let steps = cfg.softmax.steps;
    let q = x * weights.w_q();
    let k = x * weights.w_k();
    let v = x * weights.w_v();
    let qk_map = RateMap::covering(q.iter().chain(k.iter()));
    let v_map = RateMap::covering(v.iter());

    let tokens = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let hash = content_hash(&row);
            let ts = seed.derive(hash);
            let qi: Vec<f64> = q.row(i).iter().copied().collect();
            let ki: Vec<f64> = k.row(i).iter().copied().collect();
            let vi: Vec<f64> = v.row(i).iter().copied().collect();
            Ok(Token {
                seed: ts,
                hash,
                q: encode_row(&qi, qk_map, steps, ts.derive(TAG_Q))?,
                k: encode_row(&ki, qk_map, steps, ts.derive(TAG_K))?,
                v: encode_row(&vi, v_map, steps, ts.derive(TAG_V))?,
                q_sum: qi.iter().map(|&x| qk_map.to_rate(x)).sum(),
                k_sum: ki.iter().map(|&x| qk_map.to_rate(x)).sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let encoding_spikes: u64 = tokens
        .iter()
        .flat_map(|t| t.q.iter().chain(&t.k).chain(&t.v))
        .map(SpikeTrain::count)
        .sum();

    // Keys are summed in content order so the readout does not depend on
    // token positions.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&j| tokens[j].hash);
    let key_seeds: Vec<RngSeed> = tokens.iter().map(|t| t.seed).collect();
    let (a, s) = (qk_map.offset, qk_map.scale);
    let logit_bound = dk as f64 * a.abs().max((a + s).abs()).powi(2);

    let rows = tokens
        .par_iter()
        .map(|query| -> Result<(Vec<f64>, Vec<f64>, u64)> {
            let mut spikes = 0u64;
            let mut logits = Vec::with_capacity(n);
            for key in &tokens {
                let ip = inner_product_circuit(&query.q, &key.k)?;
                spikes += ip.spikes_used;
                logits.push(
                    s * s * ip.value + a * s * (query.q_sum + key.k_sum) + dk as f64 * a * a,
                );
            }
            let alphas: Vec<f64> = if n == 1 {
                vec![1.0]
            } else {
                let sm = softmax_from_logits(
                    &logits,
                    logit_bound,
                    &key_seeds,
                    &cfg.softmax,
                    query.seed.derive(TAG_SOFTMAX),
                )?;
                spikes += sm.spikes_used;
                sm.alphas.iter().map(|e| e.value).collect()
            };

            let mut out = vec![0.0; dk];
            match cfg.value_readout {
                ValueReadout::Decoded => {
                    for &j in &order {
                        for (o, train) in out.iter_mut().zip(&tokens[j].v) {
                            *o += alphas[j] * decode_rate(train);
                        }
                    }
                }
                ValueReadout::Coincidence => {
                    for &j in &order {
                        let alpha = encode_rate(
                            alphas[j].clamp(0.0, 1.0),
                            steps,
                            query.seed.derive(TAG_ALPHA).derive(tokens[j].seed.0),
                        )?;
                        spikes += alpha.count();
                        for (o, train) in out.iter_mut().zip(&tokens[j].v) {
                            let c = coincidence_product(&[alpha.clone(), train.clone()])?;
                            spikes += c.count();
                            *o += decode_rate(&c);
                        }
                    }
                }
            }
            out.iter_mut().for_each(|o| *o = v_map.invert(*o));
            Ok((out, alphas, spikes))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rates = Matrix::zeros(n, dk);
    let mut attention = Matrix::zeros(n, n);
    let mut spikes_used = encoding_spikes;
    for (i, (out, alphas, spikes)) in rows.into_iter().enumerate() {
        for m in 0..dk {
            rates[(i, m)] = out[m];
        }
        for j in 0..n {
            attention[(i, j)] = alphas[j];
        }
        spikes_used += spikes;
    }
    Ok(AttentionOutput {
        rates,
        spikes: None,
        attention,
        spikes_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::float_attention_oracle;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random_x(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = RngSeed(seed).rng();
        Matrix::from_fn(n, d, |_, _| rng.random::<f64>())
    }

    #[test]
    fn single_token_returns_its_value() {
        let x = Matrix::from_row_slice(1, 3, &[0.0, 1.0, 1.0]);
        let cfg = CircuitAttentionConfig::new(256).unwrap();
        let out = circuit_attention(&x, &AttentionWeights::identity(3), &cfg, RngSeed(0)).unwrap();
        assert_eq!(out.attention[(0, 0)], 1.0);
        assert_eq!(out.rates, x);
    }

    #[test]
    fn close_to_oracle_at_large_t() {
        let w = AttentionWeights::identity(8);
        let cfg = CircuitAttentionConfig::new(100_000).unwrap();
        for seed in 0..3 {
            let x = random_x(4, 8, seed);
            let out = circuit_attention(&x, &w, &cfg, RngSeed(seed)).unwrap();
            let exact = float_attention_oracle(&x, &w).unwrap();
            let err = (out.rates - exact).norm();
            assert!(err <= 0.05 * (32f64).sqrt(), "seed {seed}: {err}");
            for row in out.attention.row_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubling_twice_shrinks_error() {
        let w = AttentionWeights::identity(8);
        let median = |steps: usize| {
            let cfg = CircuitAttentionConfig::new(steps).unwrap();
            let mut errs: Vec<f64> = (0..11)
                .map(|seed| {
                    let x = random_x(4, 8, 100 + seed);
                    let out = circuit_attention(&x, &w, &cfg, RngSeed(seed)).unwrap();
                    (out.rates - float_attention_oracle(&x, &w).unwrap()).norm()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[5]
        };
        let ratio = median(1 << 12) / median(1 << 14);
        assert!((1.25..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn permuting_tokens_permutes_output_bit_exactly() {
        let w = AttentionWeights::identity(5);
        let mut rng = RngSeed(3).rng();
        for readout in [ValueReadout::Decoded, ValueReadout::Coincidence] {
            let cfg = CircuitAttentionConfig::new(512).unwrap().with_value_readout(readout);
            let x = random_x(6, 5, 4);
            let out = circuit_attention(&x, &w, &cfg, RngSeed(8)).unwrap();
            let mut perm: Vec<usize> = (0..6).collect();
            perm.shuffle(&mut rng);
            let px = Matrix::from_fn(6, 5, |i, j| x[(perm[i], j)]);
            let pout = circuit_attention(&px, &w, &cfg, RngSeed(8)).unwrap();
            assert_eq!(pout.spikes_used, out.spikes_used);
            for i in 0..6 {
                for m in 0..5 {
                    assert_eq!(pout.rates[(i, m)].to_bits(), out.rates[(perm[i], m)].to_bits());
                }
                for j in 0..6 {
                    assert_eq!(pout.attention[(i, j)], out.attention[(perm[i], perm[j])]);
                }
            }
        }
    }

    #[test]
    fn signed_projections_are_rescaled() {
        let mut rng = RngSeed(21).rng();
        let mut mk = || Matrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let w = AttentionWeights::new(mk(), mk(), mk()).unwrap();
        let x = random_x(3, 4, 22);
        let cfg = CircuitAttentionConfig::new(200_000).unwrap();
        let out = circuit_attention(&x, &w, &cfg, RngSeed(1)).unwrap();
        let exact = float_attention_oracle(&x, &w).unwrap();
        assert!((out.rates - exact).abs().max() < 0.02);
    }

    #[test]
    fn coincidence_readout_tracks_decoded() {
        let w = AttentionWeights::identity(4);
        let x = random_x(3, 4, 9);
        let cfg = CircuitAttentionConfig::new(50_000).unwrap();
        let exact = float_attention_oracle(&x, &w).unwrap();
        let out = circuit_attention(&x, &w, &cfg.with_value_readout(ValueReadout::Coincidence), RngSeed(2)).unwrap();
        assert!((out.rates - exact).abs().max() < 0.03);
    }

    #[test]
    fn rejects_out_of_range_input() {
        let x = Matrix::from_row_slice(2, 2, &[0.5, 1.2, 0.1, 0.1]);
        let cfg = CircuitAttentionConfig::new(16).unwrap();
        let err = circuit_attention(&x, &AttentionWeights::identity(2), &cfg, RngSeed(0)).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn deterministic() {
        let x = random_x(5, 6, 1);
        let w = AttentionWeights::identity(6);
        let cfg = CircuitAttentionConfig::new(1000).unwrap();
        let a = circuit_attention(&x, &w, &cfg, RngSeed(4)).unwrap();
        let b = circuit_attention(&x, &w, &cfg, RngSeed(4)).unwrap();
        assert_eq!(a, b);
        let c = circuit_attention(&x, &w, &cfg, RngSeed(5)).unwrap();
        assert_ne!(a.rates, c.rates);
    }
}
