use super::AttentionWeights;
use crate::error::{Error, Result};
use crate::Matrix;

/// Exact `softmax(QKᵀ)V` with `Q = XW_Q`, `K = XW_K`, `V = XW_V`; no
/// `1/√d_k` scaling.
pub fn float_attention_oracle(x: &Matrix, weights: &AttentionWeights) -> Result<Matrix> {
    weights.check_input(x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("input has a non-finite entry"));
    }
    let q = x * weights.w_q();
    let k = x * weights.w_k();
    let v = x * weights.w_v();
    let mut scores = &q * k.transpose();
    for mut row in scores.row_iter_mut() {
        let peak = row.max();
        row.apply(|z| *z = (*z - peak).exp());
        let total = row.sum();
        row /= total;
    }
    Ok(scores * v)
}
