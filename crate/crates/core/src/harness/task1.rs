//! Circuit attention against `softmax(XXᵀ)X` for `X ~ U([0,1]^{n×d})`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, median, std_error, Check, ExperimentConfig, ExperimentReport, NamedFit, Table};
use crate::attention::{circuit_attention, float_attention_oracle, AttentionWeights, CircuitAttentionConfig};
use crate::error::Result;
use crate::spike::RngSeed;
use crate::Matrix;

const TAG_DATA: u64 = 0xda7a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub steps: usize,
    /// MSE over all outputs, averaged over trials.
    pub mse: f64,
    pub mse_median: f64,
    /// `√mse`.
    pub error: f64,
    /// Standard error of `mse` across trials.
    pub stderr: f64,
    /// Spikes summed over all trials.
    pub spikes_used: u64,
    pub spikes_per_trial: f64,
    pub trials: usize,
}

/// One Task-1 evaluation: MSE and spike count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Trial {
    pub mse: f64,
    pub spikes: u64,
}

/// Input for trial `k`; shared by every timestep count.
pub(crate) fn trial_input(cfg: &ExperimentConfig, k: usize) -> Matrix {
    let mut rng = RngSeed(cfg.seed).derive(k as u64).derive(TAG_DATA).rng();
    Matrix::from_fn(cfg.tokens, cfg.dims, |_, _| rng.random::<f64>())
}

pub(crate) fn run_trials(cfg: &ExperimentConfig, steps: usize) -> Result<Vec<Trial>> {
    let weights = AttentionWeights::identity(cfg.dims);
    let circuit = CircuitAttentionConfig::new(steps)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let x = trial_input(cfg, k);
            let seed = RngSeed(cfg.seed).derive(k as u64).derive(steps as u64);
            let out = circuit_attention(&x, &weights, &circuit, seed)?;
            let exact = float_attention_oracle(&x, &weights)?;
            Ok(Trial {
                mse: (out.rates - exact).norm_squared() / (cfg.tokens * cfg.dims) as f64,
                spikes: out.spikes_used,
            })
        })
        .collect()
}

pub fn run_task1(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.steps.len());
    for &steps in &cfg.steps {
        let trials = run_trials(cfg, steps)?;
        let mses: Vec<f64> = trials.iter().map(|t| t.mse).collect();
        let spikes: u64 = trials.iter().map(|t| t.spikes).sum();
        let mse = mean(&mses);
        rows.push(ExperimentRow {
            steps,
            mse,
            mse_median: median(&mses),
            error: mse.sqrt(),
            stderr: std_error(&mses),
            spikes_used: spikes,
            spikes_per_trial: spikes as f64 / cfg.trials as f64,
            trials: cfg.trials,
        });
    }

    let by_spikes: Vec<(f64, f64)> = rows.iter().map(|r| (r.spikes_per_trial, r.error)).collect();
    let by_steps: Vec<(f64, f64)> = rows.iter().map(|r| (r.steps as f64, r.error)).collect();
    let mse_by_steps: Vec<(f64, f64)> = rows.iter().map(|r| (r.steps as f64, r.mse)).collect();
    let fits: Vec<NamedFit> = [
        NamedFit::try_new("error_vs_spikes", &by_spikes)?,
        NamedFit::try_new("error_vs_steps", &by_steps)?,
        NamedFit::try_new("mse_vs_steps", &mse_by_steps)?,
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut checks = Vec::new();
    if rows.len() >= 2 {
        let medians: Vec<f64> = rows.iter().map(|r| r.mse_median).collect();
        checks.push(Check::gate(
            "median_mse_strictly_decreasing",
            medians.windows(2).all(|w| w[1] < w[0]),
            format!("{medians:?}"),
        ));
    }
    if let Some(f) = fits.iter().find(|f| f.name == "error_vs_spikes") {
        checks.push(Check::gate(
            "error_vs_spikes_slope_in_[-1.1,-0.35]",
            (-1.1..=-0.35).contains(&f.fit.slope),
            format!("slope {:.4}", f.fit.slope),
        ));
    }
    Ok(ExperimentReport::new(cfg, Table::Task1(rows), fits, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    #[test]
    fn singleton_grid_has_no_fit() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Task1);
        cfg.steps = vec![16];
        cfg.trials = 2;
        let report = run_task1(&cfg).unwrap();
        let Table::Task1(rows) = &report.table else { panic!() };
        assert_eq!(rows.len(), 1);
        assert!(report.fits.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn spikes_are_conserved() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Task1);
        cfg.tokens = 3;
        cfg.dims = 4;
        cfg.trials = 2;
        let trials = run_trials(&cfg, 32).unwrap();
        let w = AttentionWeights::identity(4);
        let c = CircuitAttentionConfig::new(32).unwrap();
        for (k, t) in trials.iter().enumerate() {
            let x = trial_input(&cfg, k);
            let seed = RngSeed(cfg.seed).derive(k as u64).derive(32);
            assert_eq!(circuit_attention(&x, &w, &c, seed).unwrap().spikes_used, t.spikes);
        }
    }
}
