//! The invariant suite behind `lipdelay verify`.

use lipdelay_core::environment::{DelayDistribution, RewardFunction};
use lipdelay_core::experiment::{run_trial, trial_seed, Algorithm, ExperimentConfig};
use lipdelay_core::verification::{
    check_dlpp_invariants, check_zooming_invariants, dlpp_monte_carlo, fit_loglog_slope, stripped_reference_zooming,
    InvariantCheck, InvariantReport, ViolationContext,
};

use crate::config::{AlgorithmName, Overrides};
use crate::grid::reproduce_grid;
use crate::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub master_seed: u64,
    /// Horizon and seed count of the scheduler-identity comparison.
    pub identity_horizon: u64,
    pub identity_seeds: u32,
    /// Horizon of the instrumented zooming runs.
    pub zooming_horizon: u64,
    pub dlpp_horizon: u64,
    pub dlpp_trials: u32,
    pub monte_carlo_horizon: u64,
    pub monte_carlo_trials: u32,
    pub delta: f64,
    pub sigma: f64,
    /// Snapshot spacing in rounds.
    pub every: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            master_seed: 0,
            identity_horizon: 5000,
            identity_seeds: 5,
            zooming_horizon: 60_000,
            dlpp_horizon: 6000,
            dlpp_trials: 5,
            monte_carlo_horizon: 6000,
            monte_carlo_trials: 200,
            delta: 0.01,
            sigma: 0.1,
            every: 25,
        }
    }
}

fn triangle(delay: DelayDistribution, horizon: u64, o: &SuiteOptions) -> ExperimentConfig {
    ExperimentConfig {
        horizon,
        delta: o.delta,
        sigma: o.sigma,
        master_seed: o.master_seed,
        ..ExperimentConfig::new(Algorithm::DelayedZooming, RewardFunction::triangle(), delay)
    }
}

/// Zero-delay zooming against the scheduler-free reference, one check per seed.
pub fn scheduler_identity(o: &SuiteOptions) -> Result<InvariantCheck, SimError> {
    let config = ExperimentConfig {
        trials: o.identity_seeds,
        ..triangle(DelayDistribution::Zero, o.identity_horizon, o)
    };
    let mut check = InvariantCheck::new("scheduler_identity");
    for i in 0..o.identity_seeds {
        let production = run_trial(&config, i)?;
        let seed = trial_seed(config.master_seed, i);
        let reference = stripped_reference_zooming(config.space(), config.zooming(), &config.environment(), seed)?;
        let mismatch = production.actions.iter().zip(&reference.actions).position(|(a, b)| a != b);
        check.record(mismatch.is_none() && production.actions.len() == reference.actions.len(), || ViolationContext {
            round: mismatch.map(|r| r as u64 + 1),
            id: Some(i as u64),
            detail: "action sequences differ".into(),
        });
    }
    Ok(check)
}

/// Instrumented zooming trials under uniform and geometric delays of mean 50.
pub fn zooming_invariants(o: &SuiteOptions) -> Result<InvariantReport, SimError> {
    let mut report = InvariantReport::default();
    for delay in [DelayDistribution::uniform_with_mean(50), DelayDistribution::geometric_with_mean(50.0)?] {
        let config = ExperimentConfig { trials: 1, ..triangle(delay, o.zooming_horizon, o) };
        report.merge(&check_zooming_invariants(&config, 0, o.every, None)?);
    }
    Ok(report)
}

/// Phased pruning bookkeeping over every grid configuration.
pub fn dlpp_invariants(o: &SuiteOptions) -> Result<InvariantReport, SimError> {
    let overrides = Overrides {
        seed: Some(o.master_seed),
        trials: Some(o.dlpp_trials),
        horizon: Some(o.dlpp_horizon),
        sigma: Some(o.sigma),
        delta: Some(o.delta),
        out: None,
    };
    let mut report = InvariantReport::default();
    for run in reproduce_grid(&overrides).into_iter().filter(|c| c.algorithm == AlgorithmName::Dlpp) {
        let config = run.experiment()?;
        for i in 0..config.trials {
            report.merge(&check_dlpp_invariants(&config, i, o.every)?);
        }
    }
    Ok(report)
}

/// Clean-event failures and optimum eliminations on the triangle reward.
pub fn dlpp_statistics(o: &SuiteOptions) -> Result<Vec<InvariantCheck>, SimError> {
    let config = ExperimentConfig {
        algorithm: Algorithm::Dlpp,
        trials: o.monte_carlo_trials,
        ..triangle(DelayDistribution::Zero, o.monte_carlo_horizon, o)
    };
    let mc = dlpp_monte_carlo(&config)?;
    Ok(vec![mc.clean_event_check(o.delta), mc.optimum_survival_check(o.delta)])
}

/// Slope fitting on exact power laws `t^a`.
pub fn slope_exactness() -> InvariantCheck {
    let mut check = InvariantCheck::new("slope_fit.power_law");
    for a in [0.0, 0.5, 2.0 / 3.0, 1.0] {
        let curve: Vec<f64> = (1..=10_000).map(|t| (t as f64).powf(a)).collect();
        let slope = fit_loglog_slope(&curve, 1000, 10_000).map(|f| f.slope).unwrap_or(f64::NAN);
        check.record((slope - a).abs() <= 1e-9, || ViolationContext {
            round: None,
            id: None,
            detail: format!("exponent {a} fitted as {slope}"),
        });
    }
    check
}

/// Runs the whole suite.
pub fn run_suite(o: &SuiteOptions) -> Result<Vec<InvariantCheck>, SimError> {
    let mut checks = vec![scheduler_identity(o)?];
    checks.extend(zooming_invariants(o)?.checks);
    checks.extend(dlpp_invariants(o)?.checks);
    checks.extend(dlpp_statistics(o)?);
    checks.push(slope_exactness());
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let o = SuiteOptions {
            identity_horizon: 300,
            identity_seeds: 2,
            zooming_horizon: 2000,
            dlpp_horizon: 1500,
            dlpp_trials: 1,
            monte_carlo_horizon: 1500,
            monte_carlo_trials: 5,
            ..SuiteOptions::default()
        };
        let checks = run_suite(&o).unwrap();
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        for n in ["scheduler_identity", "zooming.lazy_bound", "zooming.covering", "dlpp.containment", "dlpp.clean_event"] {
            assert!(names.contains(&n), "{n} missing from {names:?}");
        }
        assert!(checks.iter().all(InvariantCheck::passed), "{checks:#?}");
    }
}
