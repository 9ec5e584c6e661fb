//! Empirical tails of the decoded rate against the Chernoff bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, ExperimentConfig, ExperimentReport, Table};
use crate::error::Result;
use crate::spike::{concentration_horizon, concentration_trial, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub rate: f64,
    pub steps: usize,
    pub delta: f64,
    pub observed: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub chernoff_bound: f64,
    /// `ln(2/δ)/(2δ²)`.
    pub explicit_horizon: f64,
    pub horizon_met: bool,
}

pub fn run_encoding_concentration(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells: Vec<(usize, f64, usize)> = cfg
        .rates
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| cfg.steps.iter().map(move |&t| (i, x, t)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(i, x, t)| {
            let seed = RngSeed(cfg.seed).derive(i as u64).derive(t as u64);
            concentration_trial(x, t, cfg.trials as u64, &cfg.deltas, seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for report in &reports {
        for tail in &report.tails {
            let horizon = if tail.delta < 1.0 {
                concentration_horizon(tail.delta)?.explicit
            } else {
                0.0
            };
            rows.push(ConcentrationRow {
                rate: report.x,
                steps: report.steps,
                delta: tail.delta,
                observed: tail.observed,
                exceedances: tail.exceedances,
                trials: report.trials,
                chernoff_bound: tail.chernoff_bound,
                explicit_horizon: horizon,
                horizon_met: report.steps as f64 >= horizon,
            });
        }
    }

    let past: Vec<&ConcentrationRow> = rows.iter().filter(|r| r.horizon_met).collect();
    let below = past.iter().filter(|r| r.observed < r.delta).count();
    let within = |r: &&ConcentrationRow| {
        let p = r.chernoff_bound.min(1.0);
        r.observed <= p + 3.0 * (p * (1.0 - p) / r.trials as f64).sqrt()
    };
    let violations: Vec<String> = rows
        .iter()
        .filter(|r| !within(r))
        .map(|r| format!("x={} T={} δ={}", r.rate, r.steps, r.delta))
        .collect();
    let checks = vec![
        Check::gate(
            "tail_below_delta_past_horizon",
            below == past.len(),
            format!("{below}/{} cells with T ≥ ln(2/δ)/(2δ²)", past.len()),
        ),
        Check::gate(
            "tail_within_chernoff_bound",
            violations.is_empty(),
            if violations.is_empty() {
                format!("all {} cells", rows.len())
            } else {
                violations.join("; ")
            },
        ),
    ];
    Ok(ExperimentReport::new(cfg, Table::Concentration(rows), Vec::new(), checks))
}
