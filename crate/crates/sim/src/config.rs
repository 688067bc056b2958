//! JSON experiment files and command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use lipdelay_core::environment::{DelayDistribution, RewardFunction};
use lipdelay_core::experiment::{Algorithm, ExperimentConfig};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    DelayedZooming,
    #[serde(alias = "DLPP")]
    Dlpp,
    ClassicZoomingReference,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::DelayedZooming => Algorithm::DelayedZooming,
            AlgorithmName::Dlpp => Algorithm::Dlpp,
            AlgorithmName::ClassicZoomingReference => Algorithm::ClassicZoomingReference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardName {
    Triangle,
    Sine,
    TwoDim,
}

impl RewardName {
    pub const ALL: [RewardName; 3] = [RewardName::Triangle, RewardName::Sine, RewardName::TwoDim];

    pub fn function(self) -> RewardFunction {
        match self {
            RewardName::Triangle => RewardFunction::triangle(),
            RewardName::Sine => RewardFunction::sine(),
            RewardName::TwoDim => RewardFunction::two_dim(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RewardName::Triangle => "triangle",
            RewardName::Sine => "sine",
            RewardName::TwoDim => "two_dim",
        }
    }
}

/// Delay distribution as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Zero,
    /// Uniform on `{0, ..., 2 mean}`.
    Uniform { mean: u64 },
    UniformInt { lo: u64, hi: u64 },
    /// Geometric on `{0, 1, ...}` with the given mean.
    Geometric { mean: f64 },
    GeometricProb { success_prob: f64 },
    FixedOrInfinite { tau0: u64, prob_finite: f64 },
}

impl DelaySpec {
    pub fn distribution(self) -> Result<DelayDistribution, SimError> {
        let d = match self {
            DelaySpec::Zero => DelayDistribution::Zero,
            DelaySpec::Uniform { mean } => DelayDistribution::uniform_with_mean(mean),
            DelaySpec::UniformInt { lo, hi } => DelayDistribution::UniformInt { lo, hi },
            DelaySpec::Geometric { mean } => DelayDistribution::geometric_with_mean(mean)?,
            DelaySpec::GeometricProb { success_prob } => DelayDistribution::Geometric { success_prob },
            DelaySpec::FixedOrInfinite { tau0, prob_finite } => DelayDistribution::FixedOrInfinite { tau0, prob_finite },
        };
        d.validate()?;
        Ok(d)
    }

    /// Short family name used in file names and legends.
    pub fn family(self) -> &'static str {
        match self {
            DelaySpec::Zero => "zero",
            DelaySpec::Uniform { .. } | DelaySpec::UniformInt { .. } => "uniform",
            DelaySpec::Geometric { .. } | DelaySpec::GeometricProb { .. } => "geometric",
            DelaySpec::FixedOrInfinite { .. } => "fixed_or_infinite",
        }
    }

    /// Expected delay rendered for labels; `inf` when feedback may never arrive.
    pub fn mean_label(self) -> String {
        match self.distribution().ok().and_then(|d| d.mean()) {
            Some(m) if m.fract() == 0.0 => format!("{}", m as u64),
            Some(m) => format!("{m}"),
            None => "inf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// File stem; derived from the run when absent.
    #[serde(default)]
    pub name: Option<String>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_out_dir(), name: None }
    }
}

fn default_horizon() -> u64 {
    60_000
}
fn default_delta() -> f64 {
    0.01
}
fn default_sigma() -> f64 {
    0.1
}
fn default_trials() -> u32 {
    30
}

/// One experiment as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmName,
    pub reward: RewardName,
    pub delay: DelaySpec,
    #[serde(default = "default_horizon", alias = "T")]
    pub horizon: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub grid_resolution: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line values that replace config fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u32>,
    pub horizon: Option<u64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(algorithm: AlgorithmName, reward: RewardName, delay: DelaySpec) -> Self {
        RunConfig {
            algorithm,
            reward,
            delay,
            horizon: default_horizon(),
            delta: default_delta(),
            sigma: default_sigma(),
            trials: default_trials(),
            master_seed: 0,
            grid_resolution: None,
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.master_seed = v;
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.sigma {
            self.sigma = v;
        }
        if let Some(v) = o.delta {
            self.delta = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
    }

    /// Validated library configuration.
    pub fn experiment(&self) -> Result<ExperimentConfig, SimError> {
        let config = ExperimentConfig {
            horizon: self.horizon,
            delta: self.delta,
            sigma: self.sigma,
            trials: self.trials,
            master_seed: self.master_seed,
            grid_resolution: self.grid_resolution,
            ..ExperimentConfig::new(self.algorithm.into(), self.reward.function(), self.delay.distribution()?)
        };
        config.validate()?;
        Ok(config)
    }

    pub fn algorithm_name(&self) -> &'static str {
        Algorithm::from(self.algorithm).name()
    }

    /// `<algorithm>/<delay family>/<E[τ]>`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.algorithm_name(), self.delay.family(), self.delay.mean_label())
    }

    /// File stem: the configured name or `<reward>_<algorithm>_<family><mean>`.
    pub fn stem(&self) -> String {
        if let Some(name) = &self.output.name {
            return name.clone();
        }
        let delay = match self.delay {
            DelaySpec::Zero => "zero".to_string(),
            d => format!("{}{}", d.family(), d.mean_label()),
        };
        format!("{}_{}_{}", self.reward.as_str(), self.algorithm_name(), delay)
    }
}
