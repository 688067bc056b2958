//! Delayed zooming: UCB over an adaptively activated set of arms, with a lazy
//! update cache that keeps confidence radii from collapsing between pulls.
//!
//! Per round the policy
//!
//! 1. ingests every delivered reward: it is applied when
//!    `v + 1 <= 4 * v_at_last_pull` and cached otherwise,
//! 2. activates the first uncovered grid point if the confidence balls leave
//!    one, or else picks the arm with the largest index
//!    `mean + 2 * radius` (ties go to the earliest activated arm),
//! 3. flushes the pulled arm's cache and snapshots its observation count.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::environment::{Environment, EventQueue};
use crate::experiment::{RegretTrace, TrialOutcome, TrialStreams};
use crate::metric::{CoverageGrid, Point, Space};
use crate::{log_factor, ConfigError, ContractError};

/// `sigma * sqrt((4 ln T + 2 ln(2/δ)) / (1 + v))`.
pub fn confidence_radius(v: u64, horizon: u64, delta: f64, sigma: f64) -> f64 {
    sigma * libm::sqrt(log_factor(horizon, delta) / (1.0 + v as f64))
}

/// Grid spacing for the covering oracle: `2^-9` in one dimension, `2^-7` in
/// two, `2^-4` beyond.
pub fn default_grid_resolution(dim: usize) -> f64 {
    match dim {
        1 => 1.0 / 512.0,
        2 => 1.0 / 128.0,
        _ => 1.0 / 16.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomingConfig {
    pub horizon: u64,
    pub delta: f64,
    pub sigma: f64,
    pub grid_resolution: f64,
}

impl ZoomingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(ConfigError::Sigma(self.sigma));
        }
        if !(self.grid_resolution > 0.0) || !self.grid_resolution.is_finite() {
            return Err(ConfigError::GridResolution(self.grid_resolution));
        }
        Ok(())
    }
}

/// Index of an arm in activation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArmId(pub usize);

/// Bookkeeping for one active arm.
///
/// `pulls = applied + in_flight + cache.len()` at all times: every pull is
/// either still travelling, waiting in the cache, or applied.
#[derive(Debug, Clone)]
pub struct ArmRecord {
    pub arm: Point,
    pub pulls: u64,
    pub applied: u64,
    pub in_flight: u64,
    pub sum: f64,
    pub applied_at_last_pull: u64,
    pub cache: VecDeque<f64>,
    pub activation_index: usize,
    radius: f64,
}

impl ArmRecord {
    /// Empirical mean of the applied rewards, 0 before the first one.
    pub fn mean(&self) -> f64 {
        self.sum / self.applied.max(1) as f64
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn index(&self) -> f64 {
        self.mean() + 2.0 * self.radius
    }

    /// Pulls whose reward has not been applied yet (travelling or cached).
    pub fn missing(&self) -> u64 {
        self.in_flight + self.cache.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Applied,
    Cached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub arm: ArmId,
    pub activated: bool,
}

/// Deliberate bugs for exercising the invariant monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Apply every delivered reward immediately, bypassing the cache.
    IgnoreLazyRule,
}

/// Reward travelling back to the policy: the arm and its value, nothing else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmFeedback {
    pub arm: ArmId,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct ZoomingState {
    space: Space,
    config: ZoomingConfig,
    arms: Vec<ArmRecord>,
    coverage: CoverageGrid,
    log_factor: f64,
    fault: Option<Fault>,
}

impl ZoomingState {
    pub fn new(space: Space, config: ZoomingConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let coverage = CoverageGrid::new(&space, config.grid_resolution)
            .map_err(|e| ConfigError::Other(alloc::format!("{e}")))?;
        Ok(ZoomingState {
            space,
            config,
            arms: Vec::new(),
            coverage,
            log_factor: log_factor(config.horizon, config.delta),
            fault: None,
        })
    }

    pub fn inject_fault(&mut self, fault: Fault) {
        self.fault = Some(fault);
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn config(&self) -> &ZoomingConfig {
        &self.config
    }

    pub fn arms(&self) -> &[ArmRecord] {
        &self.arms
    }

    pub fn arm(&self, id: ArmId) -> Result<&ArmRecord, ContractError> {
        self.arms.get(id.0).ok_or(ContractError::UnknownArm(id.0))
    }

    fn radius_for(&self, applied: u64) -> f64 {
        // Same expression as `confidence_radius`, with the log factor cached.
        self.config.sigma * libm::sqrt(self.log_factor / (1.0 + applied as f64))
    }

    fn refresh_radius(&mut self, id: usize) {
        let r = self.radius_for(self.arms[id].applied);
        if r != self.arms[id].radius {
            self.arms[id].radius = r;
            self.coverage.set_radius(id, r);
        }
    }

    pub fn ingest_feedback(&mut self, id: ArmId, reward: f64) -> Result<Ingest, ContractError> {
        let ignore_rule = self.fault == Some(Fault::IgnoreLazyRule);
        let arm = self.arms.get_mut(id.0).ok_or(ContractError::UnknownArm(id.0))?;
        if arm.in_flight == 0 {
            return Err(ContractError::Other(alloc::format!("arm {} has no reward in flight", id.0)));
        }
        arm.in_flight -= 1;
        if ignore_rule || arm.applied + 1 <= 4 * arm.applied_at_last_pull {
            arm.applied += 1;
            arm.sum += reward;
            self.refresh_radius(id.0);
            Ok(Ingest::Applied)
        } else {
            arm.cache.push_back(reward);
            Ok(Ingest::Cached)
        }
    }

    /// Activates an uncovered grid point, or picks the best index.
    pub fn select_arm(&mut self) -> Selection {
        if let Some(point) = self.coverage.first_uncovered() {
            let index = self.arms.len();
            let radius = self.radius_for(0);
            self.coverage.insert(point.clone(), radius);
            self.arms.push(ArmRecord {
                arm: point,
                pulls: 0,
                applied: 0,
                in_flight: 0,
                sum: 0.0,
                applied_at_last_pull: 0,
                cache: VecDeque::new(),
                activation_index: index,
                radius,
            });
            return Selection { arm: ArmId(index), activated: true };
        }
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for (i, arm) in self.arms.iter().enumerate() {
            let index = arm.index();
            if index > best_index {
                best = i;
                best_index = index;
            }
        }
        Selection { arm: ArmId(best), activated: false }
    }

    /// Records a pull: flushes the cache, then snapshots the applied count.
    pub fn commit_pull(&mut self, id: ArmId) -> Result<(), ContractError> {
        let arm = self.arms.get_mut(id.0).ok_or(ContractError::UnknownArm(id.0))?;
        arm.pulls += 1;
        arm.in_flight += 1;
        while let Some(reward) = arm.cache.pop_front() {
            arm.applied += 1;
            arm.sum += reward;
        }
        arm.applied_at_last_pull = arm.applied;
        self.refresh_radius(id.0);
        Ok(())
    }

    /// Applies every cached reward without counting a pull.
    pub fn flush_all(&mut self) {
        for id in 0..self.arms.len() {
            let arm = &mut self.arms[id];
            while let Some(reward) = arm.cache.pop_front() {
                arm.applied += 1;
                arm.sum += reward;
            }
            self.refresh_radius(id);
        }
    }

    /// Whether the confidence balls cover the whole grid.
    pub fn is_covered(&self) -> bool {
        self.coverage.uncovered_count() == 0
    }
}

/// Hooks for instrumentation; every method defaults to a no-op.
pub trait ZoomingObserver {
    /// Right after the choice for `round` is made, before it is committed.
    fn on_select(&mut self, _round: u64, _state: &ZoomingState, _selection: Selection) {}
    /// After the pull of `round` is committed and its feedback scheduled.
    fn on_round_end(&mut self, _round: u64, _state: &ZoomingState) {}
    /// After the horizon, once all deliverable feedback has arrived and every
    /// cache was flushed.
    fn on_drained(&mut self, _state: &ZoomingState) {}
}

impl ZoomingObserver for () {}

/// Runs one trial from a fresh state.
pub fn run_trial_zooming<O: ZoomingObserver>(
    space: Space,
    config: ZoomingConfig,
    env: &Environment,
    streams: &mut TrialStreams,
    observer: &mut O,
) -> Result<TrialOutcome, ContractError> {
    let state = ZoomingState::new(space, config).map_err(|e| ContractError::Other(alloc::format!("{e}")))?;
    run_zooming(state, env, streams, observer)
}

/// Runs `state` for its configured horizon.
pub fn run_zooming<O: ZoomingObserver>(
    mut state: ZoomingState,
    env: &Environment,
    streams: &mut TrialStreams,
    observer: &mut O,
) -> Result<TrialOutcome, ContractError> {
    state.space.check(&env.reward.maximizers()[0])?;
    let horizon = state.config.horizon;
    let mu_star = env.reward.optimum();
    let mut queue: EventQueue<ArmFeedback> = EventQueue::new();
    let mut delivered = Vec::new();
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut cumulative = Vec::with_capacity(horizon as usize);
    let mut regret = 0.0;

    for t in 1..=horizon {
        delivered.clear();
        queue.pop_due_into(t, &mut delivered);
        for fb in &delivered {
            state.ingest_feedback(fb.arm, fb.reward)?;
        }
        let selection = state.select_arm();
        observer.on_select(t, &state, selection);
        state.commit_pull(selection.arm)?;

        let x = state.arms[selection.arm.0].arm.clone();
        let feedback = env.draw_feedback(&x, t, &mut streams.noise, &mut streams.delays)?;
        queue.schedule(t, feedback.delay, ArmFeedback { arm: selection.arm, reward: feedback.reward })?;

        regret += (mu_star - env.reward.mean_unchecked(x.coords())).max(0.0);
        cumulative.push(regret);
        actions.push(x);
        observer.on_round_end(t, &state);
    }

    delivered.clear();
    queue.pop_due_into(u64::MAX, &mut delivered);
    for fb in &delivered {
        state.ingest_feedback(fb.arm, fb.reward)?;
    }
    state.flush_all();
    observer.on_drained(&state);

    Ok(TrialOutcome { actions, trace: RegretTrace { cumulative, seed: streams.seed } })
}
