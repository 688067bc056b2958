//! Experiment configuration, seeding, trial dispatch and aggregation.
//!
//! A trial seed is derived from `(master_seed, trial_index)`; each trial owns
//! three ChaCha8 streams (arm sampling, reward noise, delays) derived from it.
//! Delays therefore depend only on the seed and the round index, never on
//! which algorithm is running.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dlpp::{run_trial_dlpp, DlppConfig, DlppObserver};
use crate::environment::{DelayDistribution, Environment, NoiseModel, RewardFunction};
use crate::metric::{Point, Space};
use crate::verification::stripped_reference_zooming;
use crate::zooming::{default_grid_resolution, run_trial_zooming, ZoomingConfig, ZoomingObserver};
use crate::{ConfigError, ContractError, Error};

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master_seed: u64, trial_index: u32) -> u64 {
    splitmix64(master_seed ^ splitmix64(u64::from(trial_index).wrapping_add(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Arms = 1,
    Noise = 2,
    Delays = 3,
}

pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    splitmix64(trial_seed ^ splitmix64(0xD1B5_4A32_D192_ED03 ^ stream as u64))
}

/// The three random streams of one trial.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub seed: u64,
    pub arms: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub delays: ChaCha8Rng,
}

impl TrialStreams {
    pub fn from_seed(seed: u64) -> Self {
        TrialStreams {
            seed,
            arms: ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Arms)),
            noise: ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Noise)),
            delays: ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Delays)),
        }
    }
}

/// Cumulative regret after each round, `cumulative[t - 1] = R(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub cumulative: Vec<f64>,
    pub seed: u64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub actions: Vec<Point>,
    pub trace: RegretTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    DelayedZooming,
    Dlpp,
    /// Zero-delay zooming without an event queue; only valid with zero delays.
    ClassicZoomingReference,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DelayedZooming => "delayed_zooming",
            Algorithm::Dlpp => "dlpp",
            Algorithm::ClassicZoomingReference => "classic_zooming_reference",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub reward: RewardFunction,
    pub delay: DelayDistribution,
    pub horizon: u64,
    pub delta: f64,
    pub sigma: f64,
    pub trials: u32,
    pub master_seed: u64,
    /// Covering-oracle grid spacing; `None` picks the per-dimension default.
    pub grid_resolution: Option<f64>,
}

impl ExperimentConfig {
    /// Horizon 60,000, δ = 0.01, σ = 0.1, 30 trials.
    pub fn new(algorithm: Algorithm, reward: RewardFunction, delay: DelayDistribution) -> Self {
        ExperimentConfig {
            algorithm,
            reward,
            delay,
            horizon: 60_000,
            delta: 0.01,
            sigma: 0.1,
            trials: 30,
            master_seed: 0,
            grid_resolution: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        NoiseModel::new(self.sigma)?;
        if self.trials == 0 {
            return Err(ConfigError::ZeroTrials);
        }
        self.delay.validate()?;
        if let Some(r) = self.grid_resolution {
            if !(r > 0.0) || !r.is_finite() {
                return Err(ConfigError::GridResolution(r));
            }
        }
        if self.reward.dim() == 0 {
            return Err(ConfigError::Other("reward function has dimension 0".into()));
        }
        if self.algorithm == Algorithm::ClassicZoomingReference && self.delay != DelayDistribution::Zero {
            return Err(ConfigError::Delay("the classic zooming reference needs zero delays".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> Space {
        Space::unit_cube(self.reward.dim()).expect("validated dimension")
    }

    pub fn environment(&self) -> Environment {
        Environment { reward: self.reward.clone(), noise: NoiseModel { sigma: self.sigma }, delay: self.delay }
    }

    pub fn resolution(&self) -> f64 {
        self.grid_resolution.unwrap_or_else(|| default_grid_resolution(self.reward.dim()))
    }

    pub fn zooming(&self) -> ZoomingConfig {
        ZoomingConfig { horizon: self.horizon, delta: self.delta, sigma: self.sigma, grid_resolution: self.resolution() }
    }

    pub fn dlpp(&self) -> DlppConfig {
        DlppConfig { horizon: self.horizon, delta: self.delta, sigma: self.sigma }
    }

    pub fn trial_seed(&self, trial_index: u32) -> Result<u64, ConfigError> {
        if trial_index >= self.trials {
            return Err(ConfigError::TrialIndex { index: trial_index, trials: self.trials });
        }
        Ok(trial_seed(self.master_seed, trial_index))
    }
}

/// Runs trial `trial_index` of `config`.
pub fn run_trial(config: &ExperimentConfig, trial_index: u32) -> Result<TrialOutcome, Error> {
    run_trial_observed(config, trial_index, &mut (), &mut ())
}

/// As [`run_trial`], reporting to whichever observer matches the algorithm.
pub fn run_trial_observed<Z: ZoomingObserver, D: DlppObserver>(
    config: &ExperimentConfig,
    trial_index: u32,
    zooming_observer: &mut Z,
    dlpp_observer: &mut D,
) -> Result<TrialOutcome, Error> {
    config.validate()?;
    let seed = config.trial_seed(trial_index)?;
    let env = config.environment();
    let mut streams = TrialStreams::from_seed(seed);
    let outcome = match config.algorithm {
        Algorithm::DelayedZooming => {
            run_trial_zooming(config.space(), config.zooming(), &env, &mut streams, zooming_observer)?
        }
        Algorithm::Dlpp => run_trial_dlpp(config.space(), config.dlpp(), &env, &mut streams, dlpp_observer)?,
        Algorithm::ClassicZoomingReference => {
            stripped_reference_zooming(config.space(), config.zooming(), &env, seed)?
        }
    };
    Ok(outcome)
}

/// One sampled point of an averaged curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub round: u64,
    pub mean: f64,
    pub std: f64,
}

/// Pointwise mean and standard deviation over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub finals: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

pub fn aggregate(traces: &[RegretTrace]) -> Result<AggregateResult, ContractError> {
    let first = traces.first().ok_or(ContractError::EmptyInput)?;
    let len = first.cumulative.len();
    if let Some(bad) = traces.iter().find(|t| t.cumulative.len() != len) {
        return Err(ContractError::LengthMismatch(len, bad.cumulative.len()));
    }
    let mut column = Vec::with_capacity(traces.len());
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for i in 0..len {
        column.clear();
        column.extend(traces.iter().map(|t| t.cumulative[i]));
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
    }
    let finals: Vec<f64> = traces.iter().map(RegretTrace::final_regret).collect();
    let (final_mean, final_std) = mean_std(&finals);
    Ok(AggregateResult { mean, std, finals, final_mean, final_std })
}

/// At most `max_points` evenly spaced rounds, always including the first and
/// the last.
pub fn subsample_rounds(horizon: u64, max_points: usize) -> Vec<u64> {
    if horizon == 0 || max_points == 0 {
        return Vec::new();
    }
    if horizon as usize <= max_points || max_points == 1 {
        return if max_points == 1 { alloc::vec![horizon] } else { (1..=horizon).collect() };
    }
    let span = horizon - 1;
    let slots = (max_points - 1) as u64;
    let mut out: Vec<u64> = (0..=slots).map(|k| 1 + k * span / slots).collect();
    out.dedup();
    out
}

impl AggregateResult {
    pub fn horizon(&self) -> u64 {
        self.mean.len() as u64
    }

    pub fn subsample(&self, max_points: usize) -> Vec<CurvePoint> {
        subsample_rounds(self.horizon(), max_points)
            .into_iter()
            .map(|round| {
                let i = (round - 1) as usize;
                CurvePoint { round, mean: self.mean[i], std: self.std[i] }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn trace(values: Vec<f64>) -> RegretTrace {
        RegretTrace { cumulative: values, seed: 0 }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: BTreeSet<u64> = (0..30).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 30);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
        let s = trial_seed(1, 0);
        let streams: BTreeSet<u64> =
            [Stream::Arms, Stream::Noise, Stream::Delays].into_iter().map(|k| stream_seed(s, k)).collect();
        assert_eq!(streams.len(), 3);
    }

    #[test]
    fn aggregate_examples() {
        let one = trace(vec![1.0, 2.0, 4.0]);
        let agg = aggregate(core::slice::from_ref(&one)).unwrap();
        assert_eq!(agg.mean, one.cumulative);
        assert_eq!(agg.std, vec![0.0; 3]);

        let agg = aggregate(&[trace(vec![100.0; 4]), trace(vec![200.0; 4])]).unwrap();
        assert_eq!(agg.mean, vec![150.0; 4]);
        assert_eq!(agg.final_mean, 150.0);

        let agg = aggregate(&[trace(vec![1.0]), trace(vec![2.0]), trace(vec![3.0])]).unwrap();
        assert_eq!(agg.final_mean, 2.0);
        assert_abs_diff_eq!(agg.final_std, 1.0);
        assert_eq!(*agg.mean.last().unwrap(), agg.final_mean);

        assert_eq!(aggregate(&[]), Err(ContractError::EmptyInput));
        assert_eq!(aggregate(&[trace(vec![1.0]), trace(vec![1.0, 2.0])]), Err(ContractError::LengthMismatch(1, 2)));
    }

    #[test]
    fn subsampling_keeps_exact_values() {
        assert_eq!(subsample_rounds(5, 1000), vec![1, 2, 3, 4, 5]);
        let r = subsample_rounds(60_000, 1000);
        assert!(r.len() <= 1000);
        assert_eq!((r[0], *r.last().unwrap()), (1, 60_000));
        assert!(r.windows(2).all(|w| w[0] < w[1]));

        let agg = aggregate(&[trace((1..=5000).map(f64::from).collect())]).unwrap();
        for p in agg.subsample(100) {
            assert_eq!(p.mean, p.round as f64);
        }
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(Algorithm::Dlpp, RewardFunction::triangle(), DelayDistribution::Zero);
        assert!(base.validate().is_ok());
        assert_eq!(ExperimentConfig { horizon: 0, ..base.clone() }.validate(), Err(ConfigError::ZeroHorizon));
        assert_eq!(ExperimentConfig { delta: 1.0, ..base.clone() }.validate(), Err(ConfigError::Delta(1.0)));
        assert_eq!(ExperimentConfig { trials: 0, ..base.clone() }.validate(), Err(ConfigError::ZeroTrials));
        assert!(ExperimentConfig { sigma: -1.0, ..base.clone() }.validate().is_err());
        let reference = ExperimentConfig {
            algorithm: Algorithm::ClassicZoomingReference,
            delay: DelayDistribution::uniform_with_mean(20),
            ..base.clone()
        };
        assert!(reference.validate().is_err());
        assert!(matches!(run_trial(&base, 30), Err(Error::Config(ConfigError::TrialIndex { .. }))));
    }

    #[test]
    fn same_index_same_trace() {
        let config = ExperimentConfig {
            horizon: 2000,
            trials: 3,
            ..ExperimentConfig::new(Algorithm::DelayedZooming, RewardFunction::sine(), DelayDistribution::uniform_with_mean(20))
        };
        assert_eq!(run_trial(&config, 1).unwrap(), run_trial(&config, 1).unwrap());
        assert_ne!(run_trial(&config, 0).unwrap().trace, run_trial(&config, 1).unwrap().trace);
    }
}
