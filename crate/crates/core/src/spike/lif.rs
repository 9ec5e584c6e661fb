//! Discrete-time leaky integrate-and-fire neuron.
//!
//! ```text
//! u_t = β·u_{t-1} + I_t − v_th·s_{t-1}
//! s_t = 1 if u_t ≥ v_th else 0
//! ```
//!
//! The reset is soft: the threshold is subtracted on the step after a spike,
//! and a potential exactly at threshold fires.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    beta: f64,
    v_th: f64,
}

impl LifParams {
    pub fn new(beta: f64, v_th: f64) -> Result<Self> {
        // β = 0 (no memory) is accepted as the degenerate end of the range.
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must be in [0,1), got {beta}")));
        }
        if !(v_th > 0.0 && v_th.is_finite()) {
            return Err(Error::domain(format!("v_th must be positive, got {v_th}")));
        }
        Ok(LifParams { beta, v_th })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }
}

impl Default for LifParams {
    /// β = 0.5, v_th = 1.0.
    fn default() -> Self {
        LifParams {
            beta: 0.5,
            v_th: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LifState {
    /// Membrane potential.
    pub u: f64,
    /// Whether the previous step emitted a spike.
    pub s_prev: bool,
}

impl LifState {
    pub fn new(u: f64, s_prev: bool) -> Self {
        LifState { u, s_prev }
    }

    /// Advances one step in place and returns the emitted spike. The caller
    /// guarantees `current` is finite; see [`lif_step`] for the checked form.
    #[inline]
    pub fn advance(&mut self, current: f64, params: &LifParams) -> bool {
        let reset = if self.s_prev { params.v_th } else { 0.0 };
        self.u = params.beta * self.u + current - reset;
        self.s_prev = self.u >= params.v_th;
        self.s_prev
    }
}

/// One LIF update. Rejects non-finite input currents.
pub fn lif_step(state: LifState, input_current: f64, params: &LifParams) -> Result<(LifState, bool)> {
    if !input_current.is_finite() {
        return Err(Error::domain(format!(
            "input current must be finite, got {input_current}"
        )));
    }
    let mut next = state;
    let spike = next.advance(input_current, params);
    Ok((next, spike))
}
