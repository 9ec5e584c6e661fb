//! Stochastic rate coding: a value `x ∈ [0,1]` becomes independent
//! Bernoulli(x) spikes, one per timestep, and the time average decodes it.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::RngSeed;
use super::tensor::SpikeTensor;
use super::train::{words_for, SpikeTrain};
use crate::error::{Error, Result};
use crate::Matrix;

/// Fills 64 Bernoulli(p) lanes per word, where `p = threshold / 2^64`.
///
/// Each lane compares a uniform 64-bit integer against `threshold`
/// most-significant bit first, drawing one random word per bit position for
/// all lanes at once and stopping when every lane is decided. The result is
/// distributed exactly as `next_u64() < threshold` per lane but costs about
/// eight draws per word instead of sixty-four.
fn bernoulli_word<R: RngCore>(threshold: u64, rng: &mut R) -> u64 {
    let mut result = 0u64;
    let mut undecided = u64::MAX;
    for k in (0..64).rev() {
        let r = rng.next_u64();
        if threshold >> k & 1 == 1 {
            // Lanes drawing 0 where the threshold has 1 are below it.
            result |= undecided & !r;
            undecided &= r;
        } else {
            undecided &= !r;
        }
        if undecided == 0 {
            break;
        }
    }
    result
}

fn threshold_for(x: f64) -> u64 {
    // 2^64 as f64; the cast saturates for values that round up to it.
    (x * 18_446_744_073_709_551_616.0) as u64
}

/// Writes Bernoulli(x) bits for `len` timesteps into `words`.
pub(crate) fn fill_bernoulli<R: RngCore>(words: &mut [u64], len: usize, x: f64, rng: &mut R) {
    debug_assert_eq!(words.len(), words_for(len));
    if x <= 0.0 {
        words.fill(0);
    } else if x >= 1.0 {
        words.fill(u64::MAX);
    } else {
        let threshold = threshold_for(x);
        for w in words.iter_mut() {
            *w = bernoulli_word(threshold, rng);
        }
    }
    if !len.is_multiple_of(64) {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << (len % 64)) - 1;
        }
    }
}

fn check_rate(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("rate must be in [0,1], got {x}")));
    }
    Ok(())
}

/// Encodes `x` as `steps` independent Bernoulli(x) spikes.
pub fn encode_rate(x: f64, steps: usize, seed: RngSeed) -> Result<SpikeTrain> {
    check_rate(x)?;
    if steps == 0 {
        return Err(Error::domain("timestep count must be positive"));
    }
    let mut train = SpikeTrain::zeros(steps);
    fill_bernoulli(train.words_mut(), steps, x, &mut seed.rng());
    Ok(train)
}

/// Fraction of timesteps carrying a spike.
pub fn decode_rate(train: &SpikeTrain) -> f64 {
    if train.is_empty() {
        return 0.0;
    }
    train.count() as f64 / train.len() as f64
}

/// Encodes every entry of `x`; cell `(i, j)` uses `seed.derive_cell(i, j)`.
pub fn encode_matrix(x: &Matrix, steps: usize, seed: RngSeed) -> Result<SpikeTensor> {
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "entry ({i}, {j}) = {v} is outside [0,1]"
                )));
            }
        }
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::domain("cannot encode an empty matrix"));
    }
    let trains = (0..x.nrows() * x.ncols())
        .map(|k| {
            let (i, j) = (k / x.ncols(), k % x.ncols());
            encode_rate(x[(i, j)], steps, seed.derive_cell(i, j))
        })
        .collect::<Result<Vec<_>>>()?;
    SpikeTensor::from_trains(x.nrows(), x.ncols(), trains)
}

/// Chernoff–Hoeffding tail bound `2·exp(−2Tδ²)` for the decoded rate.
pub fn chernoff_bound(steps: usize, delta: f64) -> f64 {
    2.0 * (-2.0 * steps as f64 * delta * delta).exp()
}

/// Timesteps after which `P[|rate − x| > δ] < δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationHorizon {
    /// Order-only form `1/δ²`.
    pub asymptotic: f64,
    /// Explicit form `ln(2/δ) / (2δ²)`, obtained by solving the Chernoff
    /// bound for a tail of δ.
    pub explicit: f64,
}

pub fn concentration_horizon(delta: f64) -> Result<ConcentrationHorizon> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    Ok(ConcentrationHorizon {
        asymptotic: 1.0 / (delta * delta),
        explicit: (2.0 / delta).ln() / (2.0 * delta * delta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub delta: f64,
    /// Fraction of trials with `|decoded − x| > δ`.
    pub observed: f64,
    pub exceedances: u64,
    pub chernoff_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub x: f64,
    pub steps: usize,
    pub trials: u64,
    pub tails: Vec<TailEstimate>,
}

/// Counts how often the decoded rate misses `x` by more than each δ.
///
/// Trial `k` encodes with `seed.derive(k)`. The tail event is evaluated on
/// spike counts, `|count − x·T| > δ·T`, with a 1e-9 slack so that ties on
/// the boundary are not decided by float rounding of `x·T`.
pub fn concentration_trial(
    x: f64,
    steps: usize,
    trials: u64,
    deltas: &[f64],
    seed: RngSeed,
) -> Result<ConcentrationReport> {
    if trials == 0 {
        return Err(Error::domain("trial count must be positive"));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!(
            "concentration requires a rate bounded away from 0 and 1, got {x}"
        )));
    }
    if steps == 0 {
        return Err(Error::domain("timestep count must be positive"));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::domain(format!("delta must be nonnegative, got {d}")));
    }

    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut words = vec![0u64; words_for(steps)];
            fill_bernoulli(&mut words, steps, x, &mut seed.derive(k).rng());
            words.iter().map(|w| u64::from(w.count_ones())).sum()
        })
        .collect();

    let expected = x * steps as f64;
    let tails = deltas
        .iter()
        .map(|&delta| {
            let limit = delta * steps as f64 + 1e-9;
            let exceedances = counts
                .iter()
                .filter(|&&c| (c as f64 - expected).abs() > limit)
                .count() as u64;
            TailEstimate {
                delta,
                observed: exceedances as f64 / trials as f64,
                exceedances,
                chernoff_bound: chernoff_bound(steps, delta),
            }
        })
        .collect();

    Ok(ConcentrationReport {
        x,
        steps,
        trials,
        tails,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngCore;

    #[test]
    fn extremes_are_deterministic() {
        let z = encode_rate(0.0, 100, RngSeed(1)).unwrap();
        assert_eq!(z.count(), 0);
        let o = encode_rate(1.0, 100, RngSeed(1)).unwrap();
        assert_eq!(o.count(), 100);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(encode_rate(-0.01, 10, RngSeed(0)).is_err());
        assert!(encode_rate(1.01, 10, RngSeed(0)).is_err());
        assert!(encode_rate(f64::NAN, 10, RngSeed(0)).is_err());
        assert!(encode_rate(0.5, 0, RngSeed(0)).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_rate(&SpikeTrain::zeros(8)), 0.0);
        assert_eq!(decode_rate(&SpikeTrain::ones(8)), 1.0);
        assert_eq!(decode_rate(&SpikeTrain::from_bits([true, false, true, false])), 0.5);
    }

    #[test]
    fn half_rate_within_three_sigma_for_most_seeds() {
        // 3σ of the mean of 10^4 Bernoulli(0.5) draws is 0.015.
        let inside = (0..200)
            .filter(|&s| {
                let r = decode_rate(&encode_rate(0.5, 10_000, RngSeed(s)).unwrap());
                (0.485..=0.515).contains(&r)
            })
            .count();
        assert!(inside >= 198, "{inside}/200 seeds within 3σ");
    }

    #[test]
    fn bernoulli_word_matches_direct_comparison_in_distribution() {
        // The lane-parallel sampler against the one-draw-per-bit definition.
        let x = 0.3137;
        let threshold = threshold_for(x);
        let mut rng = RngSeed(9).rng();
        let mut fast = 0u64;
        let mut slow = 0u64;
        let words = 20_000;
        for _ in 0..words {
            fast += u64::from(bernoulli_word(threshold, &mut rng).count_ones());
            for _ in 0..64 {
                slow += u64::from(rng.next_u64() < threshold);
            }
        }
        let n = (words * 64) as f64;
        let sd = (x * (1.0 - x) / n).sqrt();
        assert!((fast as f64 / n - x).abs() < 4.0 * sd);
        assert!((slow as f64 / n - x).abs() < 4.0 * sd);
    }

    #[test]
    fn encode_matrix_names_bad_index() {
        let mut m = Matrix::zeros(2, 3);
        m[(1, 2)] = 1.5;
        let err = encode_matrix(&m, 4, RngSeed(0)).unwrap_err().to_string();
        assert!(err.contains("(1, 2)"), "{err}");
    }

    #[test]
    fn encode_matrix_binary_patterns_are_exact() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let t = encode_matrix(&m, 16, RngSeed(3)).unwrap();
        assert_eq!(t.rates(), m);
        let z = encode_matrix(&Matrix::zeros(3, 2), 16, RngSeed(3)).unwrap();
        assert_eq!(z.count(), 0);
    }

    #[test]
    fn encode_matrix_uniform_decode_error() {
        use rand::Rng;
        let mut rng = RngSeed(11).rng();
        let x = Matrix::from_fn(16, 32, |_, _| rng.random::<f64>());
        let t = encode_matrix(&x, 64, RngSeed(5)).unwrap();
        let mae = (t.rates() - &x).abs().mean();
        assert!(mae <= 0.07, "mean abs decode error {mae}");
    }

    #[test]
    fn concentration_examples() {
        let r = concentration_trial(0.5, 1, 1000, &[0.6], RngSeed(0)).unwrap();
        assert_eq!(r.tails[0].observed, 0.0);
        let r = concentration_trial(0.5, 1000, 10_000, &[0.1], RngSeed(0)).unwrap();
        assert_eq!(r.tails[0].exceedances, 0);
        assert!(concentration_trial(0.5, 10, 0, &[0.1], RngSeed(0)).is_err());
        assert!(concentration_trial(0.0, 10, 5, &[0.1], RngSeed(0)).is_err());
    }

    #[test]
    fn concentration_matches_binomial_cdf_oracle() {
        // Exact P[|Bin(100, 0.3) − 30| > 5] = P[K ≤ 24] + P[K ≥ 36] computed
        // by summing the binomial pmf in closed form.
        let oracle = binomial_two_sided_tail(100, 0.3, 5.0);
        assert!((oracle - 0.22965).abs() < 5e-5, "oracle {oracle}");
        let r = concentration_trial(0.3, 100, 10_000, &[0.05], RngSeed(2)).unwrap();
        let se = (oracle * (1.0 - oracle) / 10_000.0).sqrt();
        assert!((r.tails[0].observed - oracle).abs() < 4.0 * se);
        // The Chernoff bound is vacuous here.
        assert!(r.tails[0].chernoff_bound > 1.0);

        let oracle = binomial_two_sided_tail(1000, 0.5, 50.0);
        assert!((oracle - 0.0013917).abs() < 1e-6, "oracle {oracle}");
    }

    /// `P[|K − np| > dev]` for `K ~ Bin(n, p)`, by direct pmf summation.
    fn binomial_two_sided_tail(n: u64, p: f64, dev: f64) -> f64 {
        let mean = n as f64 * p;
        (0..=n)
            .filter(|&k| (k as f64 - mean).abs() > dev + 1e-9)
            .map(|k| {
                let ln_choose: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
                (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
            })
            .sum()
    }

    #[test]
    fn horizon_forms() {
        let h = concentration_horizon(0.1).unwrap();
        assert!((h.asymptotic - 100.0).abs() < 1e-9);
        assert!((h.explicit - 50.0 * 20f64.ln()).abs() < 1e-9);
        assert!(concentration_horizon(0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn encoding_is_deterministic(x in 0.0f64..=1.0, steps in 1usize..300, seed in any::<u64>()) {
            let a = encode_rate(x, steps, RngSeed(seed)).unwrap();
            let b = encode_rate(x, steps, RngSeed(seed)).unwrap();
            prop_assert_eq!(a.len(), steps);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn decoded_rate_is_a_fraction(x in 0.0f64..=1.0, steps in 1usize..300, seed in any::<u64>()) {
            let r = decode_rate(&encode_rate(x, steps, RngSeed(seed)).unwrap());
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
