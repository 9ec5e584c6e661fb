//! Effective dimension: the number of principal components needed to reach
//! a fraction of the total variance, measured over random subsamples.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::RngSeed;
use crate::Matrix;

/// Largest Gram-matrix side decomposed exactly; above it the randomized
/// range finder is used.
pub const EXACT_PCA_LIMIT: usize = 4096;
const OVERSAMPLING: usize = 10;
const POWER_ITERATIONS: usize = 2;
const ROW_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffDimConfig {
    pub threshold: f64,
    pub subsamples: usize,
    pub fraction: f64,
}

impl Default for EffDimConfig {
    fn default() -> Self {
        EffDimConfig {
            threshold: 0.95,
            subsamples: 5,
            fraction: 0.8,
        }
    }
}

impl EffDimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::domain(format!(
                "variance threshold must be in (0,1], got {}",
                self.threshold
            )));
        }
        if self.subsamples == 0 {
            return Err(Error::domain("subsample count must be positive"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::domain(format!(
                "subsample fraction must be in (0,1], got {}",
                self.fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    Exact,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffDimReport {
    pub d_eff_mean: f64,
    pub d_eff_std: f64,
    /// Component count of each subsample.
    pub per_subsample: Vec<usize>,
    /// Component count on the full data.
    pub full_data: usize,
    pub variance_threshold: f64,
    pub subsample_fraction: f64,
    pub subsample_count: usize,
    pub samples: usize,
    pub features: usize,
    /// Per-component variance of the full data, nonincreasing. Complete
    /// for the exact method; the leading components for the randomized one.
    pub spectrum: Vec<f64>,
    pub total_variance: f64,
    pub method: PcaMethod,
}

struct Spectrum {
    /// Eigenvalues of the scatter matrix, descending.
    values: Vec<f64>,
    total: f64,
}

impl Spectrum {
    /// Smallest `k` with cumulative share `≥ threshold`.
    fn components_for(&self, threshold: f64) -> Option<usize> {
        let target = threshold * self.total;
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            acc += v;
            // Relative slack for round-off in the eigen solver.
            if acc >= target * (1.0 - 1e-12) {
                return Some(k + 1);
            }
        }
        None
    }
}

fn column_means(data: &Matrix, rows: &[usize]) -> Vec<f64> {
    let mut means = vec![0.0; data.ncols()];
    for &i in rows {
        for (m, v) in means.iter_mut().zip(data.row(i).iter()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= rows.len() as f64);
    means
}

fn centered_block(data: &Matrix, rows: &[usize], means: &[f64]) -> Matrix {
    Matrix::from_fn(rows.len(), data.ncols(), |r, c| data[(rows[r], c)] - means[c])
}

/// Sum of squared centered entries.
fn total_scatter(data: &Matrix, rows: &[usize], means: &[f64]) -> f64 {
    rows.par_iter()
        .map(|&i| {
            data.row(i)
                .iter()
                .zip(means)
                .map(|(v, m)| (v - m).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// `Σ (x_i − μ)(x_i − μ)ᵀ` over `rows`, in row blocks.
fn feature_scatter(data: &Matrix, rows: &[usize], means: &[f64]) -> Matrix {
    let f = data.ncols();
    rows.par_chunks(ROW_BLOCK)
        .map(|chunk| {
            let block = centered_block(data, chunk, means);
            // An explicit transpose hits the blocked gemm; tr_mul does not.
            block.transpose() * &block
        })
        .reduce(|| DMatrix::zeros(f, f), |a, b| a + b)
}

fn sorted_eigenvalues(gram: Matrix) -> Vec<f64> {
    let mut values: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Scatter spectrum from whichever Gram matrix is smaller.
fn exact_spectrum(data: &Matrix, rows: &[usize], means: &[f64]) -> Spectrum {
    let gram = if data.ncols() <= rows.len() {
        feature_scatter(data, rows, means)
    } else {
        let block = centered_block(data, rows, means);
        &block * block.transpose()
    };
    Spectrum {
        values: sorted_eigenvalues(gram),
        total: total_scatter(data, rows, means),
    }
}

/// Subsample spectrum from the full-data scatter `full` (centered at
/// `full_means`): subtract the excluded rows, then shift to the subsample
/// mean. Saves the Gram work when the subsample is most of the data.
fn subsample_spectrum(data: &Matrix, rows: &[usize], full: &Matrix, full_means: &[f64]) -> Spectrum {
    let m = data.nrows();
    let mut keep = vec![false; m];
    rows.iter().for_each(|&i| keep[i] = true);
    let excluded: Vec<usize> = (0..m).filter(|&i| !keep[i]).collect();
    let mut gram = full - feature_scatter(data, &excluded, full_means);
    let means = column_means(data, rows);
    let shift = nalgebra::DVector::from_iterator(
        means.len(),
        means.iter().zip(full_means).map(|(a, b)| a - b),
    );
    gram.ger(-(rows.len() as f64), &shift, &shift, 1.0);
    Spectrum {
        values: sorted_eigenvalues(gram),
        total: total_scatter(data, rows, &means),
    }
}

/// Randomized range finder with power iterations, growing the sketch until
/// the captured variance reaches `threshold` of the total.
fn randomized_spectrum(data: &Matrix, rows: &[usize], means: &[f64], threshold: f64, seed: RngSeed) -> Spectrum {
    let x = centered_block(data, rows, means);
    let total = total_scatter(data, rows, means);
    let rank_cap = x.nrows().min(x.ncols());
    let mut k = 32.min(rank_cap);
    let mut attempt = 0u64;
    loop {
        let width = (k + OVERSAMPLING).min(rank_cap);
        let mut rng = seed.derive(attempt).rng();
        let omega = Matrix::from_fn(x.ncols(), width, |_, _| {
            // Box-Muller; the sketch only needs a rotation-invariant law.
            let (u, v): (f64, f64) = (rng.random::<f64>().max(f64::MIN_POSITIVE), rng.random());
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        });
        let mut q = (&x * omega).qr().q();
        for _ in 0..POWER_ITERATIONS {
            let z = (x.transpose() * &q).qr().q();
            q = (&x * z).qr().q();
        }
        let b = q.transpose() * &x;
        let gram = &b * b.transpose();
        let mut values: Vec<f64> = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0))
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let spectrum = Spectrum { values, total };
        let reached = spectrum
            .components_for(threshold)
            .is_some_and(|c| c <= k);
        if reached || width == rank_cap {
            return spectrum;
        }
        k = (2 * k).min(rank_cap);
        attempt += 1;
    }
}

fn spectrum_for(data: &Matrix, rows: &[usize], threshold: f64, seed: RngSeed) -> (Spectrum, PcaMethod) {
    let means = column_means(data, rows);
    if rows.len().min(data.ncols()) <= EXACT_PCA_LIMIT {
        (exact_spectrum(data, rows, &means), PcaMethod::Exact)
    } else {
        (
            randomized_spectrum(data, rows, &means, threshold, seed),
            PcaMethod::Randomized,
        )
    }
}

/// Effective dimension of `data` (rows are samples), with columns
/// mean-centered and not rescaled.
///
/// Subsample `k` draws `⌈fraction·samples⌉` rows without replacement using
/// `seed.derive(k)`.
pub fn effective_dimension(data: &Matrix, cfg: &EffDimConfig, seed: RngSeed) -> Result<EffDimReport> {
    cfg.validate()?;
    let (m, f) = data.shape();
    if m < 2 || f == 0 {
        return Err(Error::domain(format!(
            "need at least 2 samples and 1 feature, got {m}×{f}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("data has a non-finite entry"));
    }
    let sub_len = ((cfg.fraction * m as f64).ceil() as usize).clamp(2, m);

    let all: Vec<usize> = (0..m).collect();
    // Feature-side exact path for both the full data and every subsample:
    // compute the full scatter once and derive subsamples from it.
    let shared = f <= sub_len && f <= EXACT_PCA_LIMIT && sub_len < m;
    let full_means = column_means(data, &all);
    let full_scatter = shared.then(|| feature_scatter(data, &all, &full_means));
    let (full, method) = match &full_scatter {
        Some(g) => (
            Spectrum {
                values: sorted_eigenvalues(g.clone()),
                total: total_scatter(data, &all, &full_means),
            },
            PcaMethod::Exact,
        ),
        None => spectrum_for(data, &all, cfg.threshold, seed.derive(u64::MAX)),
    };
    if !(full.total > 0.0) {
        return Err(Error::degenerate("data has zero variance"));
    }
    let full_count = full
        .components_for(cfg.threshold)
        .ok_or_else(|| Error::degenerate("variance threshold not reached"))?;

    let mut per_subsample = Vec::with_capacity(cfg.subsamples);
    for k in 0..cfg.subsamples {
        let s = seed.derive(k as u64);
        let mut rows = index::sample(&mut s.rng(), m, sub_len).into_vec();
        rows.sort_unstable();
        let sub = match &full_scatter {
            Some(g) => subsample_spectrum(data, &rows, g, &full_means),
            None => spectrum_for(data, &rows, cfg.threshold, s.derive(1)).0,
        };
        if !(sub.total > 0.0) {
            return Err(Error::degenerate(format!("subsample {k} has zero variance")));
        }
        per_subsample.push(
            sub.components_for(cfg.threshold)
                .ok_or_else(|| Error::degenerate("variance threshold not reached"))?,
        );
    }
    let n = per_subsample.len() as f64;
    let mean = per_subsample.iter().map(|&c| c as f64).sum::<f64>() / n;
    let std = if per_subsample.len() > 1 {
        (per_subsample
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let scale = (m - 1) as f64;
    Ok(EffDimReport {
        d_eff_mean: mean,
        d_eff_std: std,
        per_subsample,
        full_data: full_count,
        variance_threshold: cfg.threshold,
        subsample_fraction: cfg.fraction,
        subsample_count: cfg.subsamples,
        samples: m,
        features: f,
        spectrum: full.values.iter().map(|v| v / scale).collect(),
        total_variance: full.total / scale,
        method,
    })
}
