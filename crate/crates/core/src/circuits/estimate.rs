use serde::{Deserialize, Serialize};

/// Output of a spike circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitEstimate {
    pub value: f64,
    /// Estimated standard error of `value`.
    pub stderr: f64,
    /// Spike events generated by the circuit.
    pub spikes_used: u64,
}

impl CircuitEstimate {
    pub fn new(value: f64, stderr: f64, spikes_used: u64) -> Self {
        debug_assert!(stderr >= 0.0);
        CircuitEstimate {
            value,
            stderr,
            spikes_used,
        }
    }
}
