//! Spiking self-attention: the Spikformer-style forward pass, the attention
//! block built from spike circuits, and the exact float reference.

mod circuit;
mod oracle;
mod ssa;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::SpikeTensor;
use crate::Matrix;

pub use circuit::{circuit_attention, CircuitAttentionConfig, ValueReadout};
pub use oracle::float_attention_oracle;
pub use ssa::{ssa_forward, OutputScale, SsaConfig};

/// Projection matrices, each `d × d_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    w_q: Matrix,
    w_k: Matrix,
    w_v: Matrix,
}

impl AttentionWeights {
    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        if w_q.shape() != w_k.shape() || w_q.shape() != w_v.shape() {
            return Err(Error::domain(format!(
                "projection shapes differ: W_Q {:?}, W_K {:?}, W_V {:?}",
                w_q.shape(),
                w_k.shape(),
                w_v.shape()
            )));
        }
        if w_q.is_empty() {
            return Err(Error::domain("projection matrices are empty"));
        }
        for (name, w) in [("W_Q", &w_q), ("W_K", &w_k), ("W_V", &w_v)] {
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("{name} has a non-finite entry")));
            }
        }
        Ok(AttentionWeights { w_q, w_k, w_v })
    }

    /// `W_Q = W_K = W_V = I_d`.
    pub fn identity(d: usize) -> Self {
        let eye = Matrix::identity(d, d);
        AttentionWeights { w_q: eye.clone(), w_k: eye.clone(), w_v: eye }
    }

    pub fn w_q(&self) -> &Matrix {
        &self.w_q
    }

    pub fn w_k(&self) -> &Matrix {
        &self.w_k
    }

    pub fn w_v(&self) -> &Matrix {
        &self.w_v
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn key_dim(&self) -> usize {
        self.w_q.ncols()
    }

    fn check_input(&self, d: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(Error::domain(format!(
                "input has {d} columns, weights expect {}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionOutput {
    /// `n × d_k` output rates (or estimates, for the circuit block).
    pub rates: Matrix,
    /// Output spikes, when the last stage is a spiking layer.
    pub spikes: Option<SpikeTensor>,
    /// Attention matrix: `A` for SSA, `α̂` for the circuit block.
    pub attention: Matrix,
    pub spikes_used: u64,
}
