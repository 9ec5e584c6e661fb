use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::RngSeed;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Largest observed `‖f(x) − f(y)‖_F / ‖x − y‖_F`; a lower estimate of
    /// the true constant.
    pub value: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Sampler drawing `rows × cols` matrices uniformly from `[0,1]`.
pub fn uniform_box(rows: usize, cols: usize) -> impl Fn(&mut ChaCha8Rng) -> Matrix + Sync {
    move |rng| Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Max ratio over `pairs` sampled pairs. Pair `k` is drawn from
/// `seed.derive(k)`, so more pairs never lower the estimate. Coincident
/// pairs are skipped.
pub fn estimate_lipschitz<F, S>(f: F, sampler: S, pairs: usize, seed: RngSeed) -> Result<LipschitzEstimate>
where
    F: Fn(&Matrix) -> Result<Matrix> + Sync,
    S: Fn(&mut ChaCha8Rng) -> Matrix + Sync,
{
    if pairs == 0 {
        return Err(Error::domain("pair count must be positive"));
    }
    let ratios = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.derive(k as u64).rng();
            let x = sampler(&mut rng);
            let y = sampler(&mut rng);
            let dx = (&x - &y).norm();
            if dx == 0.0 {
                return Ok(None);
            }
            let (fx, fy) = (f(&x)?, f(&y)?);
            if fx.shape() != fy.shape() {
                return Err(Error::domain("map returned outputs of different shapes"));
            }
            Ok(Some((fx - fy).norm() / dx))
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = ratios.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::degenerate("every sampled pair coincided"));
    }
    Ok(LipschitzEstimate {
        value: used.iter().cloned().fold(0.0, f64::max),
        pairs_used: used.len(),
        pairs_skipped: pairs - used.len(),
    })
}
