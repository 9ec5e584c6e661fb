//! Smallest timestep count reaching each error target on the Task-1
//! pipeline, and its spike count against the lower bound.
//!
//! The search doubles `T` until the median per-trial RMSE is at most ε,
//! then scans the last octave in eighths. Targets are processed in
//! descending order and each search starts where the previous one ended.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::task1::run_trials;
use super::{median, Check, ExperimentConfig, ExperimentReport, Table};
use crate::analysis::{lower_bound_spikes, BoundInputs};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub epsilon: f64,
    pub steps: usize,
    /// Median over trials of the per-trial RMSE.
    pub median_error: f64,
    /// Mean spikes per trial at `steps`.
    pub measured_spikes: f64,
    pub lower_bound: u64,
    pub ratio: f64,
    /// True when the target was not reached within `max_steps`.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    error: f64,
    spikes: f64,
}

struct Search<'a> {
    cfg: &'a ExperimentConfig,
    cache: BTreeMap<usize, Eval>,
}

impl Search<'_> {
    fn eval(&mut self, steps: usize) -> Result<Eval> {
        if let Some(e) = self.cache.get(&steps) {
            return Ok(*e);
        }
        let trials = run_trials(self.cfg, steps)?;
        let errors: Vec<f64> = trials.iter().map(|t| t.mse.sqrt()).collect();
        let spikes = trials.iter().map(|t| t.spikes).sum::<u64>() as f64 / trials.len() as f64;
        let e = Eval { error: median(&errors), spikes };
        self.cache.insert(steps, e);
        Ok(e)
    }

    /// Smallest feasible `T ≥ start`, or `None` past the cap.
    fn smallest(&mut self, epsilon: f64, start: usize) -> Result<Option<usize>> {
        let cap = self.cfg.max_steps;
        if self.eval(start)?.error <= epsilon {
            return Ok(Some(start));
        }
        let mut lo = start;
        let mut hi = start.saturating_mul(2);
        loop {
            let probe = hi.min(cap);
            if self.eval(probe)?.error <= epsilon {
                hi = probe;
                break;
            }
            if probe == cap {
                return Ok(None);
            }
            lo = probe;
            hi = probe.saturating_mul(2);
        }
        let stride = ((hi - lo) / 8).max(1);
        let mut t = lo + stride;
        while t < hi {
            if self.eval(t)?.error <= epsilon {
                return Ok(Some(t));
            }
            t += stride;
        }
        Ok(Some(hi))
    }
}

pub fn run_spike_accuracy(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut search = Search { cfg, cache: BTreeMap::new() };
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    let mut start = 1usize;
    for &epsilon in &cfg.epsilons {
        let found = search.smallest(epsilon, start.min(cfg.max_steps))?;
        let steps = found.unwrap_or(cfg.max_steps);
        let e = search.eval(steps)?;
        let bound = lower_bound_spikes(&BoundInputs::new(cfg.lipschitz, cfg.tokens, cfg.dims, epsilon)?)?;
        rows.push(AccuracyRow {
            epsilon,
            steps,
            median_error: e.error,
            measured_spikes: e.spikes,
            lower_bound: bound,
            ratio: e.spikes / bound as f64,
            saturated: found.is_none(),
        });
        start = steps;
    }

    let spikes: Vec<f64> = rows.iter().map(|r| r.measured_spikes).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let checks = vec![
        Check::gate(
            "measured_spikes_nondecreasing",
            spikes.windows(2).all(|w| w[1] >= w[0]),
            format!("{spikes:?}"),
        ),
        Check::observation(
            "ratio_nonincreasing",
            ratios.windows(2).all(|w| w[1] <= w[0]),
            format!("{ratios:?}"),
        ),
    ];
    Ok(ExperimentReport::new(cfg, Table::SpikeAccuracy(rows), Vec::new(), checks))
}
