//! Rectification with a single LIF neuron.
//!
//! `x/B` is rate-coded as a signed spike train: Bernoulli(|x|/B) events
//! that carry positive charge for `x > 0` and negative charge otherwise. The
//! neuron has threshold [`RELU_THRESHOLD`] and relay weight `v_th/β` per
//! event, so it fires on exactly the positive events and never on negative
//! ones. The readout `B·rate` therefore equals `max(0, x)` in expectation
//! with standard error `B·sqrt(r(1−r)/T)`.

use super::estimate::CircuitEstimate;
use super::relay_weight;
use crate::error::{Error, Result};
use crate::spike::{encode_rate, LifParams, LifState, RngSeed};

/// Threshold standing in for `v_th → 0⁺`.
pub const RELU_THRESHOLD: f64 = 1e-3;

/// Spiking estimate of `max(0, x)` for `|x| ≤ B`.
pub fn relu_circuit(x: f64, range: f64, steps: usize, seed: RngSeed) -> Result<CircuitEstimate> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::domain(format!("range bound B must be positive, got {range}")));
    }
    if !x.is_finite() || x.abs() > range {
        return Err(Error::domain(format!("relu input {x} is outside [−{range}, {range}]")));
    }
    let params = LifParams::new(0.5, RELU_THRESHOLD)?;
    let charge = x.signum() * relay_weight(&params);
    let events = encode_rate(x.abs() / range, steps, seed)?;

    let mut neuron = LifState::default();
    let mut fired = 0u64;
    for event in events.iter() {
        let current = if event { charge } else { 0.0 };
        if neuron.advance(current, &params) {
            fired += 1;
        }
    }
    let rate = fired as f64 / steps as f64;
    let stderr = range * (rate * (1.0 - rate) / steps as f64).sqrt();
    Ok(CircuitEstimate::new(range * rate, stderr, events.count() + fired))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn negative_and_zero_inputs_are_exactly_zero() {
        assert_eq!(relu_circuit(-0.5, 1.0, 1000, RngSeed(0)).unwrap().value, 0.0);
        assert_eq!(relu_circuit(0.0, 1.0, 1000, RngSeed(0)).unwrap().value, 0.0);
        assert_eq!(relu_circuit(-1.0, 1.0, 10, RngSeed(0)).unwrap().value, 0.0);
    }

    #[test]
    fn positive_input_tracks_value() {
        let est = relu_circuit(0.7, 1.0, 10_000, RngSeed(0)).unwrap();
        assert!((est.value - 0.7).abs() <= 0.02, "{}", est.value);
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn fires_exactly_on_positive_events() {
        // The neuron output must equal the event train bit for bit.
        let seed = RngSeed(8);
        let est = relu_circuit(0.35, 1.0, 999, seed).unwrap();
        let events = encode_rate(0.35, 999, seed).unwrap();
        assert_eq!(est.value, events.count() as f64 / 999.0);
        assert_eq!(est.spikes_used, 2 * events.count());
    }

    #[test]
    fn scales_with_range() {
        let est = relu_circuit(3.0, 4.0, 20_000, RngSeed(2)).unwrap();
        assert!((est.value - 3.0).abs() < 4.0 * 4.0 * (0.75 * 0.25 / 20_000f64).sqrt());
    }

    #[test]
    fn validation() {
        assert!(relu_circuit(0.5, 0.0, 10, RngSeed(0)).is_err());
        assert!(relu_circuit(0.5, -1.0, 10, RngSeed(0)).is_err());
        assert!(relu_circuit(2.0, 1.0, 10, RngSeed(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nonpositive_is_zero_for_any_seed(x in -1.0f64..=0.0, steps in 1usize..2000, seed in any::<u64>()) {
            prop_assert_eq!(relu_circuit(x, 1.0, steps, RngSeed(seed)).unwrap().value, 0.0);
        }
    }
}
