//! Independent oracles and invariant monitors.
//!
//! - [`stripped_reference_zooming`] re-implements zero-delay zooming with a
//!   one-slot hand-off instead of the event queue and with the brute-force
//!   covering scan instead of the incremental grid.
//! - [`ZoomingMonitor`] and [`DlppMonitor`] watch a running trial and count
//!   violations of the bookkeeping invariants.
//! - [`dlpp_monte_carlo`] estimates how often frozen ball means leave their
//!   confidence bound and how often the optimum gets pruned.
//! - [`fit_loglog_slope`] measures the growth rate of a regret curve.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dlpp::{DlppObserver, PhaseReport, PhaseState};
use crate::environment::{DelayDistribution, Environment, RewardFunction};
use crate::experiment::{run_trial_observed, Algorithm, ExperimentConfig, RegretTrace, TrialOutcome, TrialStreams};
use crate::metric::{find_uncovered, sup_distance, Ball, BallId, Point, Space};
use crate::zooming::{confidence_radius, Fault, Selection, ZoomingConfig, ZoomingObserver, ZoomingState};
use crate::{log_factor, ContractError, Error};

/// Zero-delay zooming without any scheduler: the reward of round `s` is handed
/// to round `s + 1` directly, under the same lazy rule.
pub fn stripped_reference_zooming(
    space: Space,
    config: ZoomingConfig,
    env: &Environment,
    seed: u64,
) -> Result<TrialOutcome, Error> {
    if env.delay != DelayDistribution::Zero {
        return Err(ContractError::Other("the reference implementation only supports zero delays".into()).into());
    }
    config.validate()?;

    struct RefArm {
        x: Point,
        v: u64,
        sum: f64,
        snapshot: u64,
        cache: Vec<f64>,
    }

    let ZoomingConfig { horizon, delta, sigma, grid_resolution } = config;
    let mut streams = TrialStreams::from_seed(seed);
    let mu_star = env.reward.optimum();
    let mut arms: Vec<RefArm> = Vec::new();
    let mut handoff: Option<(usize, f64)> = None;
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut cumulative = Vec::with_capacity(horizon as usize);
    let mut regret = 0.0;

    for t in 1..=horizon {
        if let Some((i, y)) = handoff.take() {
            let arm = &mut arms[i];
            if arm.v + 1 <= 4 * arm.snapshot {
                arm.v += 1;
                arm.sum += y;
            } else {
                arm.cache.push(y);
            }
        }

        let balls: Vec<Ball> = arms
            .iter()
            .enumerate()
            .map(|(i, a)| Ball {
                center: a.x.clone(),
                radius: confidence_radius(a.v, horizon, delta, sigma),
                id: BallId(i as u32),
            })
            .collect();
        let chosen = match find_uncovered(&space, &balls, grid_resolution)? {
            Some(x) => {
                arms.push(RefArm { x, v: 0, sum: 0.0, snapshot: 0, cache: Vec::new() });
                arms.len() - 1
            }
            None => {
                let mut best = 0;
                let mut best_index = f64::NEG_INFINITY;
                for (i, (a, b)) in arms.iter().zip(&balls).enumerate() {
                    let index = a.sum / a.v.max(1) as f64 + 2.0 * b.radius;
                    if index > best_index {
                        best = i;
                        best_index = index;
                    }
                }
                best
            }
        };

        let arm = &mut arms[chosen];
        for y in arm.cache.drain(..) {
            arm.v += 1;
            arm.sum += y;
        }
        arm.snapshot = arm.v;
        let fb = env.draw_feedback(&arm.x, t, &mut streams.noise, &mut streams.delays)?;
        handoff = Some((chosen, fb.reward));

        regret += (mu_star - env.reward.mean(&arm.x)?).max(0.0);
        cumulative.push(regret);
        actions.push(arm.x.clone());
    }

    Ok(TrialOutcome { actions, trace: RegretTrace { cumulative, seed } })
}

/// Where a violation was first seen.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationContext {
    pub round: Option<u64>,
    /// Arm or ball id.
    pub id: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: String,
    pub checked: u64,
    pub violations: u64,
    /// Violations tolerated before the check fails.
    pub allowed: u64,
    pub first_violation: Option<ViolationContext>,
}

impl InvariantCheck {
    pub fn new(name: &str) -> Self {
        InvariantCheck { name: name.into(), checked: 0, violations: 0, allowed: 0, first_violation: None }
    }

    pub fn passed(&self) -> bool {
        self.violations <= self.allowed
    }

    /// Counts one check; records the context of the first failure.
    pub fn record(&mut self, ok: bool, context: impl FnOnce() -> ViolationContext) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(context());
            }
        }
    }

    pub fn merge(&mut self, other: &InvariantCheck) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.allowed += other.allowed;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation.clone();
        }
    }
}

impl fmt::Display for InvariantCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} checked={} violations={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.violations
        )?;
        if let Some(ctx) = &self.first_violation {
            write!(f, " first=")?;
            if let Some(r) = ctx.round {
                write!(f, "round:{r},")?;
            }
            if let Some(id) = ctx.id {
                write!(f, "id:{id},")?;
            }
            write!(f, "{}", ctx.detail)?;
        }
        Ok(())
    }
}

/// Named checks in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn get(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(InvariantCheck::passed)
    }

    pub fn add(&mut self, check: InvariantCheck) {
        match self.checks.iter_mut().find(|c| c.name == check.name) {
            Some(existing) => existing.merge(&check),
            None => self.checks.push(check),
        }
    }

    pub fn merge(&mut self, other: &InvariantReport) {
        for c in &other.checks {
            self.add(c.clone());
        }
    }
}

fn ctx(round: Option<u64>, id: Option<u64>, detail: String) -> ViolationContext {
    ViolationContext { round, id, detail }
}

/// Watches a delayed zooming trial.
///
/// Every `every` rounds it checks count conservation, the lazy-radius bound
/// `1 + v <= 4 (1 + v_at_last_pull)` and, on selection rounds, that the
/// confidence balls leave no grid point uncovered (brute-force scan).
#[derive(Debug, Clone)]
pub struct ZoomingMonitor {
    every: u64,
    expect_drain: bool,
    pub conservation: InvariantCheck,
    pub lazy_bound: InvariantCheck,
    pub covering: InvariantCheck,
    pub drain: InvariantCheck,
}

impl ZoomingMonitor {
    /// `expect_drain` additionally asserts that every pull's reward has been
    /// applied after the final flush (no feedback is lost).
    pub fn new(every: u64, expect_drain: bool) -> Self {
        ZoomingMonitor {
            every: every.max(1),
            expect_drain,
            conservation: InvariantCheck::new("zooming.count_conservation"),
            lazy_bound: InvariantCheck::new("zooming.lazy_bound"),
            covering: InvariantCheck::new("zooming.covering"),
            drain: InvariantCheck::new("zooming.drain"),
        }
    }

    pub fn report(&self) -> InvariantReport {
        let mut r = InvariantReport::default();
        r.add(self.conservation.clone());
        r.add(self.lazy_bound.clone());
        r.add(self.covering.clone());
        if self.expect_drain {
            r.add(self.drain.clone());
        }
        r
    }

    fn check_counts(&mut self, round: Option<u64>, state: &ZoomingState) {
        for (i, a) in state.arms().iter().enumerate() {
            let total = a.applied + a.in_flight + a.cache.len() as u64;
            self.conservation.record(a.pulls == total, || {
                ctx(round, Some(i as u64), format!("pulls={} applied+in_flight+cached={total}", a.pulls))
            });
            if a.pulls > 0 {
                self.lazy_bound.record(1 + a.applied <= 4 * (1 + a.applied_at_last_pull), || {
                    ctx(round, Some(i as u64), format!("v={} v_at_last_pull={}", a.applied, a.applied_at_last_pull))
                });
            }
        }
    }
}

impl ZoomingObserver for ZoomingMonitor {
    fn on_select(&mut self, round: u64, state: &ZoomingState, selection: Selection) {
        if selection.activated || !round.is_multiple_of(self.every) {
            return;
        }
        let balls: Vec<Ball> = state
            .arms()
            .iter()
            .enumerate()
            .map(|(i, a)| Ball { center: a.arm.clone(), radius: a.radius(), id: BallId(i as u32) })
            .collect();
        let hole = find_uncovered(state.space(), &balls, state.config().grid_resolution).ok().flatten();
        self.covering.record(hole.is_none(), || {
            ctx(Some(round), Some(selection.arm.0 as u64), format!("uncovered point {:?}", hole.map(|p| p.coords().to_vec())))
        });
    }

    fn on_round_end(&mut self, round: u64, state: &ZoomingState) {
        if round.is_multiple_of(self.every) {
            self.check_counts(Some(round), state);
        }
    }

    fn on_drained(&mut self, state: &ZoomingState) {
        for (i, a) in state.arms().iter().enumerate() {
            let total = a.applied + a.in_flight + a.cache.len() as u64;
            self.conservation.record(a.pulls == total, || {
                ctx(None, Some(i as u64), format!("pulls={} applied+in_flight+cached={total}", a.pulls))
            });
        }
        if self.expect_drain {
            for (i, a) in state.arms().iter().enumerate() {
                self.drain.record(a.pulls == a.applied, || {
                    ctx(None, Some(i as u64), format!("pulls={} applied={}", a.pulls, a.applied))
                });
            }
        }
    }
}

/// Watches a phased pruning trial.
#[derive(Debug, Clone)]
pub struct DlppMonitor {
    every: u64,
    space: Space,
    reward: RewardFunction,
    maximizers: Vec<Point>,
    sigma: f64,
    log_factor: f64,
    pub budget_bound: InvariantCheck,
    pub budget_exact: InvariantCheck,
    pub containment: InvariantCheck,
    pub survivors: InvariantCheck,
    /// Frozen balls compared against their concentration bound.
    pub clean_event_pairs: u64,
    pub clean_event_failures: u64,
    /// Set once no surviving ball contains a maximizer.
    pub optimum_eliminated: bool,
    pub last_round: u64,
}

impl DlppMonitor {
    pub fn new(config: &ExperimentConfig, every: u64) -> Self {
        DlppMonitor {
            every: every.max(1),
            space: config.space(),
            reward: config.reward.clone(),
            maximizers: config.reward.maximizers(),
            sigma: config.sigma,
            log_factor: log_factor(config.horizon, config.delta),
            budget_bound: InvariantCheck::new("dlpp.budget_bound"),
            budget_exact: InvariantCheck::new("dlpp.budget_exact"),
            containment: InvariantCheck::new("dlpp.containment"),
            survivors: InvariantCheck::new("dlpp.survivors_nonempty"),
            clean_event_pairs: 0,
            clean_event_failures: 0,
            optimum_eliminated: false,
            last_round: 0,
        }
    }

    pub fn report(&self) -> InvariantReport {
        let mut r = InvariantReport::default();
        for c in [&self.budget_bound, &self.budget_exact, &self.containment, &self.survivors] {
            r.add(c.clone());
        }
        r
    }

    /// `r_m + sigma sqrt((4 ln T + 2 ln(2/δ)) / v_m)`.
    pub fn concentration_bound(&self, radius: f64, budget: u64) -> f64 {
        radius + self.sigma * libm::sqrt(self.log_factor / budget as f64)
    }
}

impl DlppObserver for DlppMonitor {
    fn on_round_end(&mut self, round: u64, state: &PhaseState) {
        self.last_round = round;
        if !round.is_multiple_of(self.every) {
            return;
        }
        for b in state.balls() {
            self.budget_bound.record(b.observed <= state.budget(), || {
                ctx(Some(round), Some(b.ball.id.0 as u64), format!("observed={} budget={}", b.observed, state.budget()))
            });
        }
    }

    fn on_phase_end(&mut self, round: u64, report: &PhaseReport) {
        let bound = self.concentration_bound(report.radius, report.budget);
        for b in &report.balls {
            self.budget_exact.record(b.frozen && b.observed == report.budget, || {
                ctx(Some(round), Some(b.ball.id.0 as u64), format!("observed={} budget={}", b.observed, report.budget))
            });
            let mu = self.reward.mean_unchecked(b.ball.center.coords());
            self.clean_event_pairs += 1;
            // Absolute slack for rounding once r_m drops below 1e-12.
            if libm::fabs(b.frozen_mean - mu) > bound + 1e-12 {
                self.clean_event_failures += 1;
            }
        }
        self.survivors.record(!report.survivors.is_empty(), || {
            ctx(Some(round), None, format!("phase {} has no survivors", report.phase))
        });
        let parents: Vec<&Ball> = report
            .survivors
            .iter()
            .map(|id| &report.balls[id.0 as usize].ball)
            .collect();
        for child in &report.children {
            let inside = parents
                .iter()
                .any(|p| sup_distance(p.center.coords(), child.center.coords()) <= p.radius);
            self.containment.record(inside, || {
                ctx(Some(round), Some(child.id.0 as u64), format!("child {:?} outside survivors", child.center.coords()))
            });
        }
        let kept = self.maximizers.iter().any(|m| {
            parents
                .iter()
                .any(|p| sup_distance(p.center.coords(), m.coords()) <= p.radius)
        });
        if !kept {
            self.optimum_eliminated = true;
        }
        let _ = &self.space;
    }
}

/// Runs one delayed zooming trial under a [`ZoomingMonitor`].
pub fn check_zooming_invariants(
    config: &ExperimentConfig,
    trial_index: u32,
    every: u64,
    fault: Option<Fault>,
) -> Result<InvariantReport, Error> {
    config.validate()?;
    let all_arrive = !matches!(config.delay, DelayDistribution::FixedOrInfinite { prob_finite, .. } if prob_finite < 1.0);
    let mut monitor = ZoomingMonitor::new(every, all_arrive);
    let seed = config.trial_seed(trial_index)?;
    let mut state = ZoomingState::new(config.space(), config.zooming())?;
    if let Some(f) = fault {
        state.inject_fault(f);
    }
    let mut streams = TrialStreams::from_seed(seed);
    crate::zooming::run_zooming(state, &config.environment(), &mut streams, &mut monitor)?;
    Ok(monitor.report())
}

/// Runs one phased pruning trial under a [`DlppMonitor`].
pub fn check_dlpp_invariants(config: &ExperimentConfig, trial_index: u32, every: u64) -> Result<InvariantReport, Error> {
    let config = ExperimentConfig { algorithm: Algorithm::Dlpp, ..config.clone() };
    let mut monitor = DlppMonitor::new(&config, every);
    run_trial_observed(&config, trial_index, &mut (), &mut monitor)?;
    Ok(monitor.report())
}

/// Monte Carlo summary over phased pruning trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlppMonteCarlo {
    pub trials: u32,
    pub clean_event_pairs: u64,
    pub clean_event_failures: u64,
    pub optimum_eliminations: u32,
}

impl DlppMonteCarlo {
    /// Fraction of (trial, frozen ball) pairs outside the concentration bound.
    pub fn clean_event_failure_fraction(&self) -> f64 {
        if self.clean_event_pairs == 0 {
            0.0
        } else {
            self.clean_event_failures as f64 / self.clean_event_pairs as f64
        }
    }

    /// Fraction of trials in which the optimum was pruned.
    pub fn elimination_fraction(&self) -> f64 {
        self.optimum_eliminations as f64 / self.trials.max(1) as f64
    }

    /// Failures tolerated up to `2δ` of the frozen balls.
    pub fn clean_event_check(&self, delta: f64) -> InvariantCheck {
        InvariantCheck {
            checked: self.clean_event_pairs,
            violations: self.clean_event_failures,
            allowed: libm::floor(2.0 * delta * self.clean_event_pairs as f64) as u64,
            ..InvariantCheck::new("dlpp.clean_event")
        }
    }

    /// Eliminations tolerated up to `3δ` of the trials.
    pub fn optimum_survival_check(&self, delta: f64) -> InvariantCheck {
        InvariantCheck {
            checked: self.trials as u64,
            violations: self.optimum_eliminations as u64,
            allowed: libm::floor(3.0 * delta * self.trials as f64) as u64,
            ..InvariantCheck::new("dlpp.optimum_survival")
        }
    }
}

/// Runs `config.trials` phased pruning trials and tallies the clean-event
/// failures and optimum eliminations.
pub fn dlpp_monte_carlo(config: &ExperimentConfig) -> Result<DlppMonteCarlo, Error> {
    let config = ExperimentConfig { algorithm: Algorithm::Dlpp, ..config.clone() };
    let mut out = DlppMonteCarlo { trials: config.trials, clean_event_pairs: 0, clean_event_failures: 0, optimum_eliminations: 0 };
    for i in 0..config.trials {
        let mut monitor = DlppMonitor::new(&config, u64::MAX);
        run_trial_observed(&config, i, &mut (), &mut monitor)?;
        out.clean_event_pairs += monitor.clean_event_pairs;
        out.clean_event_failures += monitor.clean_event_failures;
        out.optimum_eliminations += u32::from(monitor.optimum_eliminated);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub t_lo: u64,
    pub t_hi: u64,
    /// The window start was moved past nonpositive values.
    pub shrunk: bool,
}

/// Least-squares slope of `ln R(t)` against `ln t` for `t` in
/// `[t_lo, t_hi]`, where `curve[t - 1] = R(t)`.
///
/// Rounds with nonpositive regret at the start of the window are skipped and
/// reported through [`SlopeFit::shrunk`].
pub fn fit_loglog_slope(curve: &[f64], t_lo: u64, t_hi: u64) -> Result<SlopeFit, ContractError> {
    if t_lo == 0 || t_lo >= t_hi || t_hi as usize > curve.len() {
        return Err(ContractError::Other(format!(
            "invalid window [{t_lo}, {t_hi}] for a curve of {} rounds",
            curve.len()
        )));
    }
    let window = &curve[(t_lo - 1) as usize..t_hi as usize];
    let skip = window.iter().rposition(|&v| !(v > 0.0)).map_or(0, |i| i + 1);
    let start = t_lo + skip as u64;
    if start >= t_hi {
        return Err(ContractError::Other(format!("fewer than two positive values in [{t_lo}, {t_hi}]")));
    }
    let n = (t_hi - start + 1) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for t in start..=t_hi {
        sx += libm::log(t as f64);
        sy += libm::log(curve[(t - 1) as usize]);
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in start..=t_hi {
        let dx = libm::log(t as f64) - mx;
        sxy += dx * (libm::log(curve[(t - 1) as usize]) - my);
        sxx += dx * dx;
    }
    Ok(SlopeFit { slope: sxy / sxx, t_lo: start, t_hi, shrunk: skip > 0 })
}
