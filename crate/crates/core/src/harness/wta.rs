//! Normalizer convergence: max-abs error of `α̂` against `e_i/Σe_j` over a
//! grid of channel counts and timesteps.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, median, std_error, Check, ExperimentConfig, ExperimentReport, NamedFit, Table};
use crate::circuits::{wta_normalize, WtaConfig};
use crate::error::Result;
use crate::spike::{encode_rate, LifParams, RngSeed, SpikeTrain};

const TAG_RATES: u64 = 0x7a7e;
const MIN_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtaRow {
    pub channels: usize,
    pub steps: usize,
    pub transient: usize,
    /// Max-abs error, averaged over trials.
    pub error: f64,
    pub error_median: f64,
    pub stderr: f64,
    /// Input and normalizer spikes summed over trials.
    pub spikes_used: u64,
    pub trials: usize,
}

fn trial(cfg: &ExperimentConfig, n: usize, steps: usize, k: usize) -> Result<(f64, u64)> {
    let base = RngSeed(cfg.seed).derive(k as u64).derive(n as u64);
    let mut rng = base.derive(TAG_RATES).rng();
    let rates: Vec<f64> = (0..n).map(|_| rng.random_range(MIN_RATE..=1.0)).collect();
    let total: f64 = rates.iter().sum();
    let inputs = rates
        .iter()
        .enumerate()
        .map(|(i, &e)| encode_rate(e, steps, base.derive(steps as u64).derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let out = wta_normalize(&inputs, &WtaConfig::with_default_transient(n, steps)?, &LifParams::default())?;
    let error = out
        .alphas
        .iter()
        .zip(&rates)
        .map(|(a, e)| (a.value - e / total).abs())
        .fold(0.0, f64::max);
    let spikes = inputs.iter().map(SpikeTrain::count).sum::<u64>() + out.spikes_used();
    Ok((error, spikes))
}

pub fn run_wta_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .channels
        .iter()
        .flat_map(|&n| cfg.steps.iter().map(move |&t| (n, t)))
        .collect();
    let results = cells
        .iter()
        .flat_map(|&(n, t)| (0..cfg.trials).map(move |k| (n, t, k)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, t, k)| trial(cfg, n, t, k))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<WtaRow> = cells
        .iter()
        .zip(results.chunks(cfg.trials))
        .map(|(&(n, t), chunk)| {
            let errors: Vec<f64> = chunk.iter().map(|r| r.0).collect();
            WtaRow {
                channels: n,
                steps: t,
                transient: WtaConfig::with_default_transient(n, t).map_or(0, |c| c.transient),
                error: mean(&errors),
                error_median: median(&errors),
                stderr: std_error(&errors),
                spikes_used: chunk.iter().map(|r| r.1).sum(),
                trials: cfg.trials,
            }
        })
        .collect();

    let mut fits = Vec::new();
    let mut checks = Vec::new();
    for &n in &cfg.channels {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.channels == n)
            .map(|r| (r.steps as f64, r.error))
            .collect();
        if let Some(f) = NamedFit::try_new(format!("error_vs_steps_n{n}"), &points)? {
            checks.push(Check::gate(
                format!("slope_n{n}_in_[-0.65,-0.35]"),
                (-0.65..=-0.35).contains(&f.fit.slope),
                format!("slope {:.4}", f.fit.slope),
            ));
            fits.push(f);
        }
    }
    for &n in &cfg.channels {
        if !cfg.channels.contains(&(2 * n)) {
            continue;
        }
        let ratios: Vec<f64> = cfg
            .steps
            .iter()
            .map(|&t| {
                let at = |c: usize| rows.iter().find(|r| r.channels == c && r.steps == t).map_or(f64::NAN, |r| r.error);
                at(2 * n) / at(n)
            })
            .collect();
        let m = median(&ratios);
        checks.push(Check::gate(
            format!("growth_n{n}_to_n{}_at_most_2.5", 2 * n),
            m <= 2.5,
            format!("median ratio {m:.4}"),
        ));
    }
    Ok(ExperimentReport::new(cfg, Table::Wta(rows), fits, checks))
}
