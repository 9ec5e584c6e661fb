//! Experiment configuration: defaults per experiment, overlaid by a TOML
//! file, overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Task1,
    Wta,
    Concentration,
    SpikeAccuracy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Task1,
        ExperimentKind::Wta,
        ExperimentKind::Concentration,
        ExperimentKind::SpikeAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Task1 => "task1",
            ExperimentKind::Wta => "wta",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::SpikeAccuracy => "spike-accuracy",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::domain(format!(
                    "unknown experiment '{s}'; expected one of: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Fully resolved configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Base seed; trial `k` uses `RngSeed(seed).derive(k)`.
    pub seed: u64,
    /// Seeds (trials) per grid cell.
    pub trials: usize,
    /// Tokens `n` and dimensions `d` of the attention input.
    pub tokens: usize,
    pub dims: usize,
    pub steps: Vec<usize>,
    /// Normalizer sizes for `wta`.
    pub channels: Vec<usize>,
    /// Encoded values for `concentration`.
    pub rates: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Error targets for `spike-accuracy`, descending.
    pub epsilons: Vec<f64>,
    /// Timestep cap of the `spike-accuracy` search.
    pub max_steps: usize,
    /// Lipschitz constant used for the lower bound in `spike-accuracy`.
    pub lipschitz: f64,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            seed: 0,
            trials: 10,
            tokens: 16,
            dims: 32,
            steps: vec![4, 8, 16, 32, 64],
            channels: Vec::new(),
            rates: Vec::new(),
            deltas: Vec::new(),
            epsilons: Vec::new(),
            max_steps: 1 << 18,
            lipschitz: 1.0,
            output_dir: None,
        };
        match kind {
            ExperimentKind::Task1 => base,
            ExperimentKind::Wta => ExperimentConfig {
                trials: 20,
                channels: vec![4, 8, 16, 32],
                steps: vec![1 << 8, 1 << 10, 1 << 12, 1 << 14, 1 << 16],
                ..base
            },
            ExperimentKind::Concentration => ExperimentConfig {
                trials: 10_000,
                rates: vec![0.1, 0.3, 0.5, 0.7, 0.9],
                steps: vec![10, 100, 1000, 5000],
                deltas: vec![0.05, 0.1, 0.2],
                ..base
            },
            ExperimentKind::SpikeAccuracy => ExperimentConfig {
                steps: Vec::new(),
                epsilons: vec![0.2, 0.1, 0.05, 0.02, 0.01],
                ..base
            },
        }
    }

    /// Defaults for the experiment named in `text` (or `kind` if given),
    /// overlaid with the file's values.
    pub fn from_toml_str(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        ExperimentConfig::parse(text, kind, 0)
    }

    fn parse(text: &str, kind: Option<ExperimentKind>, seed: u64) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::domain(format!("config: {}", e.message())))?;
        let named = file
            .experiment
            .as_ref()
            .and_then(|e| e.id.as_deref())
            .map(ExperimentKind::from_str)
            .transpose()?;
        let kind = kind.or(named).ok_or_else(|| {
            Error::domain("config does not name an experiment ([experiment] id = ...)")
        })?;
        let mut cfg = ExperimentConfig::defaults(kind);
        cfg.seed = seed;
        cfg.overlay(file);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        ExperimentConfig::load_seeded(path, kind, 0)
    }

    /// Loads `path`, using `seed` when the file sets none.
    pub fn load_seeded(path: &Path, kind: Option<ExperimentKind>, seed: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text, kind, seed).map_err(|e| match e {
            Error::Domain(msg) => Error::format(path, "config", msg),
            other => other,
        })
    }

    fn overlay(&mut self, file: ConfigFile) {
        if let Some(e) = file.experiment {
            set(&mut self.seed, e.seed);
            set(&mut self.trials, e.trials);
        }
        if let Some(s) = file.shape {
            set(&mut self.tokens, s.tokens);
            set(&mut self.dims, s.dims);
        }
        if let Some(g) = file.grid {
            set(&mut self.steps, g.steps);
            set(&mut self.channels, g.channels);
            set(&mut self.rates, g.rates);
            set(&mut self.deltas, g.deltas);
            set(&mut self.epsilons, g.epsilons);
            set(&mut self.max_steps, g.max_steps);
            set(&mut self.lipschitz, g.lipschitz);
        }
        if let Some(o) = file.output {
            if o.dir.is_some() {
                self.output_dir = o.dir;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("trials must be positive"));
        }
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::domain(msg.to_string())) };
        match self.experiment {
            ExperimentKind::Task1 => {
                need(self.tokens > 0 && self.dims > 0, "tokens and dims must be positive")?;
                need(!self.steps.is_empty(), "steps grid is empty")?;
                need(self.steps.windows(2).all(|w| w[0] < w[1]), "steps grid must be strictly ascending")?;
                need(self.steps[0] > 0, "steps must be positive")?;
            }
            ExperimentKind::Wta => {
                need(!self.channels.is_empty(), "channels grid is empty")?;
                need(self.channels.iter().all(|&n| n >= 2), "channel counts must be at least 2")?;
                need(!self.steps.is_empty(), "steps grid is empty")?;
                need(self.steps.windows(2).all(|w| w[0] < w[1]), "steps grid must be strictly ascending")?;
                let t0 = crate::circuits::default_transient(*self.channels.iter().max().unwrap_or(&2));
                need(self.steps[0] > t0, "every step count must exceed the transient")?;
            }
            ExperimentKind::Concentration => {
                need(!self.rates.is_empty(), "rates grid is empty")?;
                need(self.rates.iter().all(|&x| x > 0.0 && x < 1.0), "rates must be in (0,1)")?;
                need(!self.steps.is_empty() && self.steps.iter().all(|&t| t > 0), "steps must be positive")?;
                need(!self.deltas.is_empty(), "deltas grid is empty")?;
                need(self.deltas.iter().all(|&d| d > 0.0 && d.is_finite()), "deltas must be positive")?;
            }
            ExperimentKind::SpikeAccuracy => {
                need(self.tokens > 0 && self.dims > 0, "tokens and dims must be positive")?;
                need(!self.epsilons.is_empty(), "epsilons grid is empty")?;
                need(self.epsilons.iter().all(|&e| e > 0.0 && e < 1.0), "epsilons must be in (0,1)")?;
                need(self.epsilons.windows(2).all(|w| w[0] > w[1]), "epsilons must be strictly descending")?;
                need(self.max_steps >= 1, "max_steps must be positive")?;
                need(self.lipschitz > 0.0 && self.lipschitz.is_finite(), "lipschitz must be positive")?;
            }
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<ExperimentSection>,
    shape: Option<ShapeSection>,
    grid: Option<GridSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    id: Option<String>,
    seed: Option<u64>,
    trials: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeSection {
    tokens: Option<usize>,
    dims: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    steps: Option<Vec<usize>>,
    channels: Option<Vec<usize>>,
    rates: Option<Vec<f64>>,
    deltas: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    max_steps: Option<usize>,
    lipschitz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let text = r#"
            # small task
            [experiment]
            id = "task1"
            seed = 7

            [grid]
            steps = [4, 8, 16]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text, None).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Task1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.steps, vec![4, 8, 16]);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.tokens, 16);
    }

    #[test]
    fn explicit_kind_wins() {
        let cfg = ExperimentConfig::from_toml_str("[experiment]\nid = \"task1\"\n", Some(ExperimentKind::Wta)).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Wta);
    }

    #[test]
    fn rejects_unknown_keys_and_names() {
        assert!(ExperimentConfig::from_toml_str("[grid]\nstep = [1]\n", Some(ExperimentKind::Task1)).is_err());
        let err = ExperimentConfig::from_toml_str("[experiment]\nid = \"nope\"\n", None).unwrap_err();
        assert!(err.to_string().contains("task1, wta, concentration, spike-accuracy"));
        assert!(ExperimentConfig::from_toml_str("", None).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Task1);
        cfg.steps = vec![8, 4];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::SpikeAccuracy);
        cfg.epsilons = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Concentration);
        cfg.rates = vec![0.0];
        assert!(cfg.validate().is_err());
        for kind in ExperimentKind::ALL {
            ExperimentConfig::defaults(kind).validate().unwrap();
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }
}
