//! Seeded experiment runners. Each run produces a table, log-log fits and a
//! list of checks; [`write_outputs`] emits them as CSV and JSON without
//! timestamps, so identical configurations give byte-identical files.

mod accuracy;
mod concentration;
mod config;
mod task1;
mod wta;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_scaling_law, ScalingFit};
use crate::error::{Error, Result};

pub use accuracy::{run_spike_accuracy, AccuracyRow};
pub use concentration::{run_encoding_concentration, ConcentrationRow};
pub use config::{ExperimentConfig, ExperimentKind};
pub use task1::{run_task1, ExperimentRow};
pub use wta::{run_wta_convergence, WtaRow};

/// A check evaluated on a run. Only gating checks decide the run's verdict;
/// the others are reported observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub gating: bool,
    pub detail: String,
}

impl Check {
    pub fn gate(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, gating: true, detail: detail.into() }
    }

    pub fn observation(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, gating: false, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: ScalingFit,
}

impl NamedFit {
    /// Fits `points` if there are at least two of them.
    pub(crate) fn try_new(name: impl Into<String>, points: &[(f64, f64)]) -> Result<Option<NamedFit>> {
        if points.len() < 2 {
            return Ok(None);
        }
        Ok(Some(NamedFit { name: name.into(), fit: fit_scaling_law(points)? }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Table {
    Task1(Vec<ExperimentRow>),
    Wta(Vec<WtaRow>),
    Concentration(Vec<ConcentrationRow>),
    SpikeAccuracy(Vec<AccuracyRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub table: Table,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub(crate) fn new(config: &ExperimentConfig, table: Table, fits: Vec<NamedFit>, checks: Vec<Check>) -> Self {
        ExperimentReport {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            table,
            fits,
            checks,
        }
    }

    /// True when every gating check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub fn failed_gates(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.gating && !c.passed).collect()
    }

    pub fn fit(&self, name: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.name == name).map(|f| &f.fit)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        fn rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| Error::domain(format!("csv: {e}")))?;
            }
            w.into_inner().map_err(|e| Error::domain(format!("csv: {e}")))
        }
        match &self.table {
            Table::Task1(r) => rows(r),
            Table::Wta(r) => rows(r),
            Table::Concentration(r) => rows(r),
            Table::SpikeAccuracy(r) => rows(r),
        }
    }

    /// JSON summary: configuration, version, fits and checks.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            experiment: ExperimentKind,
            version: &'a str,
            passed: bool,
            config: &'a ExperimentConfig,
            fits: &'a [NamedFit],
            checks: &'a [Check],
        }
        let mut s = serde_json::to_string_pretty(&Summary {
            experiment: self.config.experiment,
            version: &self.version,
            passed: self.passed(),
            config: &self.config,
            fits: &self.fits,
            checks: &self.checks,
        })?;
        s.push('\n');
        Ok(s)
    }
}

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Task1 => run_task1(cfg),
        ExperimentKind::Wta => run_wta_convergence(cfg),
        ExperimentKind::Concentration => run_encoding_concentration(cfg),
        ExperimentKind::SpikeAccuracy => run_spike_accuracy(cfg),
    }
}

/// Writes `<name>.csv` and `<name>_summary.json` into `dir` and returns
/// their paths.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = report.config.experiment.name();
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}_summary.json"));
    std::fs::write(&csv_path, report.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&json_path, report.summary_json()?).map_err(|e| Error::io(&json_path, e))?;
    Ok(vec![csv_path, json_path])
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Standard error of the mean; zero for a single value.
pub(crate) fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}
