//! Exponential via chained spike coincidences.
//!
//! For `z ∈ [−M, M]` the circuit encodes `r = (z + M)/(2M)` as `J`
//! independent Bernoulli trains. The prefix coincidence `C_j` (AND of the
//! first `j` copies) fires at rate `r^j`, and the readout
//!
//! ```text
//! I = Σ_{j=0..J} (2M)^j / j! · rate(C_j)      (C_0 ≡ 1)
//! ```
//!
//! estimates the truncated series `Σ_{j≤J} (2Mr)^j / j!`, whose limit is
//! `e^{2Mr} = e^{z+M}`. The estimate returned for `e^z` is `e^{−M}·I`; the
//! common factor `e^{M}` cancels in any normalization over a shared `M`.

use serde::{Deserialize, Serialize};

use super::estimate::CircuitEstimate;
use crate::error::{Error, Result};
use crate::spike::encoding::fill_bernoulli;
use crate::spike::{RngSeed, SpikeTrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpCircuitConfig {
    /// Input range bound `M`; inputs must satisfy `|z| ≤ M`.
    pub bound: f64,
    /// Taylor truncation order `J`.
    pub order: usize,
    /// Timesteps `T`.
    pub steps: usize,
}

impl ExpCircuitConfig {
    pub fn new(bound: f64, order: usize, steps: usize) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::domain(format!("exp bound M must be positive, got {bound}")));
        }
        if order == 0 {
            return Err(Error::domain("Taylor order J must be at least 1"));
        }
        if steps == 0 {
            return Err(Error::domain("timestep count must be positive"));
        }
        Ok(ExpCircuitConfig {
            bound,
            order,
            steps,
        })
    }

    /// `J = ⌈2M + ln(1/δ)⌉`.
    pub fn for_precision(bound: f64, delta: f64, steps: usize) -> Result<Self> {
        check_delta(delta)?;
        let order = (2.0 * bound + (1.0 / delta).ln()).ceil().max(1.0) as usize;
        Self::new(bound, order, steps)
    }

    /// Smallest `J ≥ ⌈2M + ln(1/δ)⌉` whose Lagrange remainder bound
    /// `(2M)^{J+1}/(J+1)!` on the relative truncation error is at most `δ/3`.
    pub fn for_relative_precision(bound: f64, delta: f64, steps: usize) -> Result<Self> {
        let base = Self::for_precision(bound, delta, steps)?;
        let mut order = base.order;
        while relative_truncation_bound(bound, order) > delta / 3.0 {
            order += 1;
        }
        Self::new(bound, order, steps)
    }

    /// Series weights `w_j = (2M)^j / j!` for `j = 0..=J`.
    pub fn weights(&self) -> Vec<f64> {
        let y = 2.0 * self.bound;
        let mut w = Vec::with_capacity(self.order + 1);
        let mut term = 1.0;
        w.push(term);
        for j in 1..=self.order {
            term *= y / j as f64;
            w.push(term);
        }
        w
    }

    /// `e^{4M}/(4T)`: variance bound on the raw readout `I`.
    pub fn readout_variance_bound(&self) -> f64 {
        (4.0 * self.bound).exp() / (4.0 * self.steps as f64)
    }

    /// `e^{−M}·Σ_{j≤J} (2Mr)^j/j!`, the value the estimate converges to as
    /// `T → ∞` with `J` fixed.
    pub fn surrogate(&self, z: f64) -> f64 {
        let r = self.rate(z);
        let y = 2.0 * self.bound * r;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=self.order {
            term *= y / j as f64;
            sum += term;
        }
        (-self.bound).exp() * sum
    }

    fn rate(&self, z: f64) -> f64 {
        ((z + self.bound) / (2.0 * self.bound)).clamp(0.0, 1.0)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("precision delta must be in (0,1), got {delta}")));
    }
    Ok(())
}

/// `(2M)^{J+1}/(J+1)!`, computed in log space.
fn relative_truncation_bound(bound: f64, order: usize) -> f64 {
    let k = order + 1;
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    (k as f64 * (2.0 * bound).ln() - ln_fact).exp()
}

/// Full record of one exponential-circuit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpReadout {
    /// `e^{−M}·I`, the estimate of `e^z`.
    pub estimate: CircuitEstimate,
    /// Raw readout `I = Σ w_j rate(C_j)`.
    pub readout: f64,
    /// Decoded coincidence rates `rate(C_j)` for `j = 0..=J`.
    pub coincidence_rates: Vec<f64>,
}

/// Estimate of `e^z`.
pub fn exp_circuit(z: f64, cfg: &ExpCircuitConfig, seed: RngSeed) -> Result<CircuitEstimate> {
    exp_readout(z, cfg, seed).map(|r| r.estimate)
}

/// Runs the circuit and returns the readout with its per-order rates.
///
/// Copy `j` of the rate train uses `seed.derive(j)`. The reported stderr
/// is the sample standard deviation of the per-timestep readout divided by
/// `√T`; spikes counted are those of the `J` encoder copies and of the `J`
/// coincidence detectors.
pub fn exp_readout(z: f64, cfg: &ExpCircuitConfig, seed: RngSeed) -> Result<ExpReadout> {
    if !z.is_finite() || z.abs() > cfg.bound * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "exp input {z} is outside [−{m}, {m}]",
            m = cfg.bound
        )));
    }
    let steps = cfg.steps;
    let r = cfg.rate(z);

    let mut prefix = SpikeTrain::ones(steps);
    let mut copy = SpikeTrain::zeros(steps);
    let mut counts = Vec::with_capacity(cfg.order + 2);
    counts.push(steps as u64);
    let mut spikes = 0u64;
    for j in 1..=cfg.order {
        fill_bernoulli(copy.words_mut(), steps, r, &mut seed.derive(j as u64).rng());
        spikes += copy.count();
        prefix.and_assign(&copy)?;
        let c = prefix.count();
        spikes += c;
        counts.push(c);
    }

    let weights = cfg.weights();
    let t = steps as f64;
    let readout: f64 = weights
        .iter()
        .zip(&counts)
        .map(|(w, &c)| w * c as f64 / t)
        .sum();

    // Per-timestep readout is the partial sum S_k = Σ_{j≤k} w_j, where k is
    // the longest coincidence active at that step. counts[k] − counts[k+1]
    // steps have exactly that depth.
    let mut partial = 0.0;
    let mut second_moment = 0.0;
    for k in 0..=cfg.order {
        partial += weights[k];
        let next = counts.get(k + 1).copied().unwrap_or(0);
        let at_depth = (counts[k] - next) as f64;
        second_moment += at_depth * partial * partial;
    }
    let variance = if steps > 1 {
        ((second_moment - t * readout * readout) / (t - 1.0)).max(0.0)
    } else {
        0.0
    };
    let scale = (-cfg.bound).exp();
    let estimate = CircuitEstimate::new(scale * readout, scale * (variance / t).sqrt(), spikes);

    Ok(ExpReadout {
        estimate,
        readout,
        coincidence_rates: counts.iter().map(|&c| c as f64 / t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct partial sum of the Taylor series of e^y.
    fn taylor(y: f64, order: usize) -> f64 {
        let mut fact = 1.0;
        let mut sum = 1.0;
        for j in 1..=order {
            fact *= j as f64;
            sum += y.powi(j as i32) / fact;
        }
        sum
    }

    #[test]
    fn precision_formula() {
        let c = ExpCircuitConfig::for_precision(1.0, 1e-3, 10).unwrap();
        assert_eq!(c.order, (2.0 + 1000f64.ln()).ceil() as usize);
        let tight = ExpCircuitConfig::for_relative_precision(4.0, 1e-3, 10).unwrap();
        assert!(tight.order > ExpCircuitConfig::for_precision(4.0, 1e-3, 10).unwrap().order);
        assert!(relative_truncation_bound(4.0, tight.order) <= 1e-3 / 3.0);
        assert!(relative_truncation_bound(4.0, tight.order - 1) > 1e-3 / 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(ExpCircuitConfig::new(0.0, 3, 10).is_err());
        assert!(ExpCircuitConfig::new(1.0, 0, 10).is_err());
        assert!(ExpCircuitConfig::new(1.0, 3, 0).is_err());
        assert!(ExpCircuitConfig::for_precision(1.0, 1.5, 10).is_err());
    }

    #[test]
    fn rejects_out_of_range_input() {
        let c = ExpCircuitConfig::new(1.0, 4, 64).unwrap();
        assert!(exp_circuit(1.5, &c, RngSeed(0)).is_err());
        assert!(exp_circuit(f64::NAN, &c, RngSeed(0)).is_err());
    }

    #[test]
    fn surrogate_at_zero_matches_truncated_series() {
        // z = 0, M = 1 gives r = 1/2 and 2Mr = 1, so the surrogate is
        // e^{-1}·Σ_{j≤8} 1/j!.
        let c = ExpCircuitConfig::new(1.0, 8, 1).unwrap();
        let oracle = (-1f64).exp() * taylor(1.0, 8);
        assert!((c.surrogate(0.0) - oracle).abs() < 1e-15);
        assert!((oracle - 1.0).abs() < 3e-6);
    }

    #[test]
    fn lower_boundary_is_exact() {
        // r = 0: every coincidence of order ≥ 1 is silent and the readout is w_0.
        let c = ExpCircuitConfig::new(2.0, 6, 500).unwrap();
        let out = exp_readout(-2.0, &c, RngSeed(4)).unwrap();
        assert_eq!(out.readout, 1.0);
        assert_eq!(out.estimate.value, (-2f64).exp());
        assert_eq!(out.estimate.stderr, 0.0);
        assert!(out.coincidence_rates[1..].iter().all(|&r| r == 0.0));
    }

    #[test]
    fn upper_boundary_is_deterministic() {
        let c = ExpCircuitConfig::new(1.5, 12, 100).unwrap();
        let out = exp_readout(1.5, &c, RngSeed(4)).unwrap();
        let oracle = (-1.5f64).exp() * taylor(3.0, 12);
        assert!((out.estimate.value - oracle).abs() < 1e-12);
        assert_eq!(out.estimate.stderr, 0.0);
    }

    #[test]
    fn stderr_matches_spread_across_seeds() {
        // Monte-Carlo oracle: 100 seeds at z = 1, M = 2, J = 10, T = 1e5.
        let c = ExpCircuitConfig::new(2.0, 10, 100_000).unwrap();
        let runs: Vec<_> = (0..100)
            .map(|s| exp_circuit(1.0, &c, RngSeed(s)).unwrap())
            .collect();
        let e = 1f64.exp();
        let bound = c.readout_variance_bound().sqrt();
        for r in &runs {
            assert!(r.stderr <= bound);
        }
        let within = runs
            .iter()
            .filter(|r| (r.value - e).abs() <= 3.0 * r.stderr)
            .count();
        assert!(within >= 97, "{within}/100 within 3 stderr");

        let mean = runs.iter().map(|r| r.value).sum::<f64>() / 100.0;
        let sd = (runs.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        let reported = runs.iter().map(|r| r.stderr).sum::<f64>() / 100.0;
        assert!((sd / reported - 1.0).abs() < 0.25, "sd {sd} vs reported {reported}");
        // Truncation at J = 10 is far below the sampling noise.
        assert!((c.surrogate(1.0) - e).abs() < 0.1 * reported);
    }

    #[test]
    fn spike_accounting() {
        let c = ExpCircuitConfig::new(1.0, 3, 256).unwrap();
        let out = exp_readout(0.0, &c, RngSeed(1)).unwrap();
        // Copies at rate 1/2 contribute ~128 spikes each, coincidences fewer.
        let coincident: f64 = out.coincidence_rates[1..].iter().map(|r| r * 256.0).sum();
        assert!(out.estimate.spikes_used as f64 > coincident);
        assert!(out.estimate.spikes_used < 3 * 256 + 3 * 256);
    }
}
