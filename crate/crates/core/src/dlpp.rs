//! Delayed Lipschitz phased pruning.
//!
//! Phase `m` works on balls of radius `r_m = 2^-m`. Balls are sampled round
//! robin, one uniformly drawn arm per visit, until each ball has received
//! `v_m` rewards. Rewards carry the phase and ball they were drawn for; those
//! from an earlier phase or reaching an already frozen ball are dropped. When
//! every ball is frozen, balls trailing the best empirical mean by at least
//! `4 r_m` are eliminated and the survivors are split into balls of radius
//! `r_m / 2`.

use alloc::vec::Vec;

use crate::environment::{Environment, EventQueue};
use crate::experiment::{RegretTrace, TrialOutcome, TrialStreams};
use crate::metric::{cover_ball, cover_space, dedup_points, sample_in_ball, Ball, BallId, Point, Space};
use crate::{log_factor, ConfigError, ContractError};

/// `r_m = 2^-m`, floored at the smallest positive double.
pub fn phase_radius(phase: u32) -> f64 {
    libm::ldexp(1.0, -(phase.min(1074) as i32)).max(f64::from_bits(1))
}

/// `v_m = max(1, ceil(sigma^2 (4 ln T + 2 ln(2/δ)) / r_m^2))`.
pub fn required_samples(phase: u32, horizon: u64, delta: f64, sigma: f64) -> u64 {
    let scale = libm::ldexp(1.0, 2 * phase.min(600) as i32);
    let raw = libm::ceil(sigma * sigma * log_factor(horizon, delta) * scale);
    if raw >= u64::MAX as f64 {
        u64::MAX
    } else {
        (raw as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlppConfig {
    pub horizon: u64,
    pub delta: f64,
    pub sigma: f64,
}

impl DlppConfig {
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
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallStats {
    pub ball: Ball,
    pub phase: u32,
    pub observed: u64,
    pub sum: f64,
    pub frozen: bool,
    pub frozen_mean: f64,
}

impl BallStats {
    fn fresh(ball: Ball, phase: u32) -> Self {
        BallStats { ball, phase, observed: 0, sum: 0.0, frozen: false, frozen_mean: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        if self.frozen {
            self.frozen_mean
        } else {
            self.sum / self.observed.max(1) as f64
        }
    }
}

/// Feedback routed back to the ball it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallFeedback {
    pub phase: u32,
    pub ball: BallId,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallIngest {
    Applied,
    /// Applied and the ball reached its budget.
    Froze,
    StalePhase,
    AfterFreeze,
    UnknownBall,
}

/// What happened at the end of a phase.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub phase: u32,
    pub radius: f64,
    pub budget: u64,
    /// Every ball of the phase with its final statistics.
    pub balls: Vec<BallStats>,
    pub best_mean: f64,
    pub survivors: Vec<BallId>,
    /// Balls of the next phase.
    pub children: Vec<Ball>,
}

#[derive(Debug, Clone)]
pub struct PhaseState {
    config: DlppConfig,
    phase: u32,
    radius: f64,
    budget: u64,
    balls: Vec<BallStats>,
    active: usize,
    cursor: usize,
    /// Rewards addressed to a ball id the current phase does not have.
    pub unknown_ball_feedback: u64,
    pub stale_feedback: u64,
    pub late_feedback: u64,
}

impl PhaseState {
    /// Phase 1 over a `1/2`-covering of the space.
    pub fn new(space: &Space, config: DlppConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let radius = phase_radius(1);
        let centers = cover_space(space, radius).map_err(|e| ConfigError::Other(alloc::format!("{e}")))?;
        Ok(Self::with_centers(config, 1, centers))
    }

    fn with_centers(config: DlppConfig, phase: u32, centers: Vec<Point>) -> Self {
        let radius = phase_radius(phase);
        let balls: Vec<BallStats> = centers
            .into_iter()
            .enumerate()
            .map(|(i, c)| BallStats::fresh(Ball { center: c, radius, id: BallId(i as u32) }, phase))
            .collect();
        PhaseState {
            config,
            phase,
            radius,
            budget: required_samples(phase, config.horizon, config.delta, config.sigma),
            active: balls.len(),
            balls,
            cursor: 0,
            unknown_ball_feedback: 0,
            stale_feedback: 0,
            late_feedback: 0,
        }
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn balls(&self) -> &[BallStats] {
        &self.balls
    }

    /// Balls still collecting rewards, in creation order.
    pub fn in_budget(&self) -> impl Iterator<Item = &BallStats> {
        self.balls.iter().filter(|b| !b.frozen)
    }

    pub fn in_budget_is_empty(&self) -> bool {
        self.active == 0
    }

    /// Next ball in round-robin order with a fresh uniform arm inside it, or
    /// `None` when every ball is frozen and the phase must end.
    pub fn next_action<R: rand::Rng + ?Sized>(&mut self, space: &Space, rng: &mut R) -> Option<(BallId, Point)> {
        if self.active == 0 {
            return None;
        }
        let n = self.balls.len();
        let idx = (0..n).map(|k| (self.cursor + k) % n).find(|&i| !self.balls[i].frozen)?;
        self.cursor = (idx + 1) % n;
        let ball = &self.balls[idx].ball;
        Some((ball.id, sample_in_ball(space, ball, rng)))
    }

    pub fn ingest_ball_feedback(&mut self, fb: BallFeedback) -> BallIngest {
        if fb.phase != self.phase {
            self.stale_feedback += 1;
            return BallIngest::StalePhase;
        }
        let Some(stats) = self.balls.get_mut(fb.ball.0 as usize) else {
            self.unknown_ball_feedback += 1;
            return BallIngest::UnknownBall;
        };
        if stats.frozen {
            self.late_feedback += 1;
            return BallIngest::AfterFreeze;
        }
        stats.sum += fb.reward;
        stats.observed += 1;
        if stats.observed >= self.budget {
            stats.frozen = true;
            stats.frozen_mean = stats.sum / stats.observed as f64;
            self.active -= 1;
            BallIngest::Froze
        } else {
            BallIngest::Applied
        }
    }

    /// Eliminates, refines and starts the next phase.
    pub fn end_phase(&mut self, space: &Space) -> Result<PhaseReport, ContractError> {
        if self.active != 0 {
            return Err(ContractError::Other(alloc::format!(
                "phase {} still has {} balls in budget",
                self.phase,
                self.active
            )));
        }
        let best = self.balls.iter().map(|b| b.frozen_mean).fold(f64::NEG_INFINITY, f64::max);
        let threshold = 4.0 * self.radius;
        let survivors: Vec<&BallStats> = self.balls.iter().filter(|b| best - b.frozen_mean < threshold).collect();

        let child_radius = phase_radius(self.phase + 1);
        let mut centers = Vec::new();
        for s in &survivors {
            centers.extend(cover_ball(space, &s.ball, child_radius)?);
        }
        let centers = dedup_points(centers);

        let next = Self::with_centers(self.config, self.phase + 1, centers);
        let report = PhaseReport {
            phase: self.phase,
            radius: self.radius,
            budget: self.budget,
            survivors: survivors.iter().map(|s| s.ball.id).collect(),
            best_mean: best,
            children: next.balls.iter().map(|b| b.ball.clone()).collect(),
            balls: core::mem::take(&mut self.balls),
        };
        let counters = (self.unknown_ball_feedback, self.stale_feedback, self.late_feedback);
        *self = next;
        (self.unknown_ball_feedback, self.stale_feedback, self.late_feedback) = counters;
        Ok(report)
    }
}

/// Hooks for instrumentation; every method defaults to a no-op.
pub trait DlppObserver {
    fn on_round_end(&mut self, _round: u64, _state: &PhaseState) {}
    fn on_phase_end(&mut self, _round: u64, _report: &PhaseReport) {}
}

impl DlppObserver for () {}

pub fn run_trial_dlpp<O: DlppObserver>(
    space: Space,
    config: DlppConfig,
    env: &Environment,
    streams: &mut TrialStreams,
    observer: &mut O,
) -> Result<TrialOutcome, ContractError> {
    let mut state = PhaseState::new(&space, config).map_err(|e| ContractError::Other(alloc::format!("{e}")))?;
    space.check(&env.reward.maximizers()[0])?;
    let horizon = config.horizon;
    let mu_star = env.reward.optimum();
    let mut queue: EventQueue<BallFeedback> = EventQueue::new();
    let mut delivered = Vec::new();
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut cumulative = Vec::with_capacity(horizon as usize);
    let mut regret = 0.0;

    for t in 1..=horizon {
        delivered.clear();
        queue.pop_due_into(t, &mut delivered);
        for &fb in &delivered {
            state.ingest_ball_feedback(fb);
        }
        if state.in_budget_is_empty() {
            let report = state.end_phase(&space)?;
            observer.on_phase_end(t, &report);
        }
        let (ball, x) = state
            .next_action(&space, &mut streams.arms)
            .expect("a fresh phase has balls in budget");
        let feedback = env.draw_feedback(&x, t, &mut streams.noise, &mut streams.delays)?;
        queue.schedule(t, feedback.delay, BallFeedback { phase: state.phase, ball, reward: feedback.reward })?;

        regret += (mu_star - env.reward.mean_unchecked(x.coords())).max(0.0);
        cumulative.push(regret);
        actions.push(x);
        observer.on_round_end(t, &state);
    }

    Ok(TrialOutcome { actions, trace: RegretTrace { cumulative, seed: streams.seed } })
}
