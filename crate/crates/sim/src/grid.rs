//! Trial execution and the full reproduction grid.

use std::thread;
use std::time::{Duration, Instant};

use lipdelay_core::experiment::{aggregate, run_trial, AggregateResult, ExperimentConfig, RegretTrace};

use crate::config::{AlgorithmName, DelaySpec, Overrides, RewardName, RunConfig};
use crate::SimError;

/// The five delay settings of the grid: none, then uniform and geometric
/// with means 20 and 50.
pub const DELAY_SETTINGS: [DelaySpec; 5] = [
    DelaySpec::Zero,
    DelaySpec::Uniform { mean: 20 },
    DelaySpec::Uniform { mean: 50 },
    DelaySpec::Geometric { mean: 20.0 },
    DelaySpec::Geometric { mean: 50.0 },
];

pub const GRID_ALGORITHMS: [AlgorithmName; 2] = [AlgorithmName::DelayedZooming, AlgorithmName::Dlpp];

/// All 30 runs (3 rewards x 5 delay settings x 2 algorithms), with
/// `overrides` applied.
pub fn reproduce_grid(overrides: &Overrides) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(30);
    for reward in RewardName::ALL {
        for delay in DELAY_SETTINGS {
            for algorithm in GRID_ALGORITHMS {
                let mut c = RunConfig::new(algorithm, reward, delay);
                c.apply(overrides);
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub aggregate: AggregateResult,
    pub wall_time: Duration,
}

/// Runs every trial of `experiment` and returns the traces in trial order.
///
/// Trials are spread over the available cores; the result does not depend on
/// the thread count.
pub fn run_traces(experiment: &ExperimentConfig) -> Result<Vec<RegretTrace>, SimError> {
    experiment.validate()?;
    let trials = experiment.trials as usize;
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(trials);
    if workers <= 1 {
        return (0..experiment.trials)
            .map(|i| Ok(run_trial(experiment, i)?.trace))
            .collect();
    }
    let mut slots: Vec<Option<Result<RegretTrace, SimError>>> = (0..trials).map(|_| None).collect();
    thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(trials.div_ceil(workers)).enumerate() {
            let start = w * trials.div_ceil(workers);
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let idx = (start + k) as u32;
                    *slot = Some(run_trial(experiment, idx).map(|o| o.trace).map_err(SimError::from));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every trial slot is filled")).collect()
}

pub fn run_config(config: &RunConfig) -> Result<RunResult, SimError> {
    let experiment = config.experiment()?;
    let start = Instant::now();
    let traces = run_traces(&experiment)?;
    let aggregate = aggregate(&traces)?;
    Ok(RunResult { config: config.clone(), aggregate, wall_time: start.elapsed() })
}
