//! Rewards, noise, delays and delivery of delayed feedback.
//!
//! Feedback generated at round `s` with delay `τ` becomes visible at the start
//! of round `s + τ + 1`. An infinite delay means the feedback is never
//! delivered. Delays are drawn independently of the arm and of the reward.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};

use crate::metric::Point;
use crate::{ConfigError, ContractError};

type MeanFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Expected reward `μ` over the unit cube.
#[derive(Clone)]
pub enum RewardFunction {
    /// `height - slope * |x - peak|` on `[0, 1]`.
    Triangle { peak: f64, height: f64, slope: f64 },
    /// `amplitude * |sin(frequency * x)|` on `[0, 1]`.
    Sine { amplitude: f64, frequency: f64 },
    /// `1 - w1 |x - a1|_2 - w2 |x - a2|_2` on `[0, 1]^2`.
    TwoDim { anchors: [[f64; 2]; 2], weights: [f64; 2] },
    /// User-supplied mean together with its maximum and a maximizer.
    Custom { dim: usize, mean: Arc<MeanFn>, optimum: f64, maximizer: Point },
}

impl fmt::Debug for RewardFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardFunction::Triangle { peak, height, slope } => f
                .debug_struct("Triangle")
                .field("peak", peak)
                .field("height", height)
                .field("slope", slope)
                .finish(),
            RewardFunction::Sine { amplitude, frequency } => f
                .debug_struct("Sine")
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .finish(),
            RewardFunction::TwoDim { anchors, weights } => f
                .debug_struct("TwoDim")
                .field("anchors", anchors)
                .field("weights", weights)
                .finish(),
            RewardFunction::Custom { dim, optimum, .. } => f
                .debug_struct("Custom")
                .field("dim", dim)
                .field("optimum", optimum)
                .finish_non_exhaustive(),
        }
    }
}

fn l2(x: &[f64], a: &[f64; 2]) -> f64 {
    libm::hypot(x[0] - a[0], x[1] - a[1])
}

impl RewardFunction {
    /// `0.8 - 0.9 |x - 0.4|`.
    pub fn triangle() -> Self {
        RewardFunction::Triangle { peak: 0.4, height: 0.8, slope: 0.9 }
    }

    /// `(2/3) |sin(5πx/3)|`, maximized at 0.3 and 0.9.
    pub fn sine() -> Self {
        RewardFunction::Sine { amplitude: 2.0 / 3.0, frequency: 5.0 * PI / 3.0 }
    }

    /// `1 - 0.7 |x - (0.7, 0.8)|_2 - 0.4 |x - (0, 0.1)|_2`.
    ///
    /// Its Lipschitz constant under the sup metric exceeds 1; it is kept as
    /// is.
    pub fn two_dim() -> Self {
        RewardFunction::TwoDim { anchors: [[0.7, 0.8], [0.0, 0.1]], weights: [0.7, 0.4] }
    }

    pub fn dim(&self) -> usize {
        match self {
            RewardFunction::Triangle { .. } | RewardFunction::Sine { .. } => 1,
            RewardFunction::TwoDim { .. } => 2,
            RewardFunction::Custom { dim, .. } => *dim,
        }
    }

    pub fn mean(&self, x: &Point) -> Result<f64, ContractError> {
        if x.dim() != self.dim() {
            return Err(ContractError::DimensionMismatch { expected: self.dim(), actual: x.dim() });
        }
        Ok(self.mean_unchecked(x.coords()))
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            RewardFunction::Triangle { peak, height, slope } => height - slope * libm::fabs(x[0] - peak),
            RewardFunction::Sine { amplitude, frequency } => amplitude * libm::fabs(libm::sin(frequency * x[0])),
            RewardFunction::TwoDim { anchors, weights } => {
                1.0 - weights[0] * l2(x, &anchors[0]) - weights[1] * l2(x, &anchors[1])
            }
            RewardFunction::Custom { mean, .. } => mean(x),
        }
    }

    /// Maximizers of the mean over the cube.
    pub fn maximizers(&self) -> Vec<Point> {
        match self {
            RewardFunction::Triangle { peak, .. } => alloc::vec![Point::clamped(alloc::vec![*peak])],
            RewardFunction::Sine { frequency, .. } => {
                // |sin(f x)| = 1 at x = (k + 1/2) π / f.
                let mut out = Vec::new();
                let mut k = 0.0;
                loop {
                    let x = (k + 0.5) * PI / frequency;
                    if x > 1.0 {
                        break;
                    }
                    out.push(Point::clamped(alloc::vec![x]));
                    k += 1.0;
                }
                if out.is_empty() {
                    out.push(Point::clamped(alloc::vec![1.0]));
                }
                out
            }
            RewardFunction::TwoDim { anchors, weights } => {
                // The weighted two-point Weber problem is solved at the
                // heavier anchor.
                let a = if weights[0] >= weights[1] { anchors[0] } else { anchors[1] };
                alloc::vec![Point::clamped(a.to_vec())]
            }
            RewardFunction::Custom { maximizer, .. } => alloc::vec![maximizer.clone()],
        }
    }

    /// `μ* = max μ`.
    pub fn optimum(&self) -> f64 {
        match self {
            RewardFunction::Custom { optimum, .. } => *optimum,
            RewardFunction::Sine { amplitude, frequency } if PI / (2.0 * frequency) <= 1.0 => *amplitude,
            _ => self
                .maximizers()
                .iter()
                .map(|m| self.mean_unchecked(m.coords()))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Gaussian noise with standard deviation `sigma` (a `sigma`-sub-Gaussian
/// realization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma: 1.0 }
    }
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self, ConfigError> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(ConfigError::Sigma(sigma));
        }
        Ok(NoiseModel { sigma })
    }
}

/// A realized delay in rounds. `Never` is missing feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Delay {
    Rounds(u64),
    Never,
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Rounds(n) => write!(f, "{n}"),
            Delay::Never => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayDistribution {
    Zero,
    /// Discrete uniform on `{lo, ..., hi}`.
    UniformInt { lo: u64, hi: u64 },
    /// `P(τ = k) = q (1 - q)^k` on `{0, 1, ...}`.
    Geometric { success_prob: f64 },
    /// `τ0` with probability `prob_finite`, never otherwise.
    FixedOrInfinite { tau0: u64, prob_finite: f64 },
}

impl DelayDistribution {
    /// Uniform on `{0, ..., 2 mean}`.
    pub fn uniform_with_mean(mean: u64) -> Self {
        DelayDistribution::UniformInt { lo: 0, hi: 2 * mean }
    }

    /// Geometric on `{0, 1, ...}` with `q = 1 / (mean + 1)`.
    pub fn geometric_with_mean(mean: f64) -> Result<Self, ConfigError> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(ConfigError::Delay(format!("geometric mean must be finite and >= 0, got {mean}")));
        }
        let d = DelayDistribution::Geometric { success_prob: 1.0 / (mean + 1.0) };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            DelayDistribution::Zero => Ok(()),
            DelayDistribution::UniformInt { lo, hi } if lo > hi => {
                Err(ConfigError::Delay(format!("uniform bounds out of order: {lo} > {hi}")))
            }
            DelayDistribution::UniformInt { .. } => Ok(()),
            DelayDistribution::Geometric { success_prob: q } if !(q > 0.0 && q <= 1.0) => {
                Err(ConfigError::Delay(format!("geometric success probability {q} outside (0, 1]")))
            }
            DelayDistribution::Geometric { .. } => Ok(()),
            DelayDistribution::FixedOrInfinite { prob_finite: p, .. } if !(p > 0.0 && p <= 1.0) => {
                Err(ConfigError::Delay(format!("finite-delay probability {p} outside (0, 1]")))
            }
            DelayDistribution::FixedOrInfinite { .. } => Ok(()),
        }
    }

    /// Expected delay, `None` when it is infinite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            DelayDistribution::Zero => Some(0.0),
            DelayDistribution::UniformInt { lo, hi } => Some((lo + hi) as f64 / 2.0),
            DelayDistribution::Geometric { success_prob: q } => Some((1.0 - q) / q),
            DelayDistribution::FixedOrInfinite { tau0, prob_finite } => {
                (prob_finite >= 1.0).then_some(tau0 as f64)
            }
        }
    }

    /// Largest possible finite delay, `None` for unbounded support.
    pub fn max_delay(&self) -> Option<u64> {
        match *self {
            DelayDistribution::Zero => Some(0),
            DelayDistribution::UniformInt { hi, .. } => Some(hi),
            DelayDistribution::Geometric { success_prob } => (success_prob >= 1.0).then_some(0),
            DelayDistribution::FixedOrInfinite { tau0, prob_finite } => (prob_finite >= 1.0).then_some(tau0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Delay {
        match *self {
            DelayDistribution::Zero => Delay::Rounds(0),
            DelayDistribution::UniformInt { lo, hi } => Delay::Rounds(rng.random_range(lo..=hi)),
            DelayDistribution::Geometric { success_prob } => {
                // Validated on construction; Geometric counts failures before
                // the first success.
                let dist = Geometric::new(success_prob).expect("validated success probability");
                Delay::Rounds(dist.sample(rng))
            }
            DelayDistribution::FixedOrInfinite { tau0, prob_finite } => {
                if rng.random::<f64>() < prob_finite {
                    Delay::Rounds(tau0)
                } else {
                    Delay::Never
                }
            }
        }
    }

    /// `P(τ <= n)`.
    pub fn cdf(&self, n: u64) -> f64 {
        match *self {
            DelayDistribution::Zero => 1.0,
            DelayDistribution::UniformInt { lo, hi } => {
                if n < lo {
                    0.0
                } else if n >= hi {
                    1.0
                } else {
                    (n - lo + 1) as f64 / (hi - lo + 1) as f64
                }
            }
            DelayDistribution::Geometric { success_prob: q } => {
                1.0 - libm::pow(1.0 - q, n as f64 + 1.0)
            }
            DelayDistribution::FixedOrInfinite { tau0, prob_finite } => {
                if n >= tau0 {
                    prob_finite
                } else {
                    0.0
                }
            }
        }
    }

    /// `Q(p) = min { n : P(τ <= n) >= p }`, or `Never` when no finite `n`
    /// qualifies.
    pub fn quantile(&self, p: f64) -> Result<Delay, ContractError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ContractError::BadProbability(p));
        }
        Ok(match *self {
            DelayDistribution::Zero => Delay::Rounds(0),
            DelayDistribution::UniformInt { lo, hi } => {
                let width = (hi - lo + 1) as f64;
                // Smallest k >= 1 with k / width >= p.
                let mut k = libm::ceil(p * width).max(1.0) as u64;
                while k > 1 && (k - 1) as f64 / width >= p {
                    k -= 1;
                }
                while (k as f64) / width < p {
                    k += 1;
                }
                Delay::Rounds(lo + k.min(hi - lo + 1) - 1)
            }
            DelayDistribution::Geometric { success_prob: q } => {
                if q >= 1.0 {
                    return Ok(Delay::Rounds(0));
                }
                if p >= 1.0 {
                    return Ok(Delay::Never);
                }
                // 1 - (1-q)^(n+1) >= p  <=>  n + 1 >= ln(1-p) / ln(1-q).
                let guess = libm::ceil(libm::log(1.0 - p) / libm::log(1.0 - q) - 1.0).max(0.0) as u64;
                let mut n = guess;
                while n > 0 && self.cdf(n - 1) >= p {
                    n -= 1;
                }
                while self.cdf(n) < p {
                    n += 1;
                }
                Delay::Rounds(n)
            }
            DelayDistribution::FixedOrInfinite { tau0, prob_finite } => {
                if p <= prob_finite {
                    Delay::Rounds(tau0)
                } else {
                    Delay::Never
                }
            }
        })
    }
}

/// Everything the simulator needs to answer a pull.
#[derive(Debug, Clone)]
pub struct Environment {
    pub reward: RewardFunction,
    pub noise: NoiseModel,
    pub delay: DelayDistribution,
}

/// One generated observation: the noisy reward and its delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reward: f64,
    pub delay: Delay,
}

impl Environment {
    /// Draws the reward from `noise_rng` and the delay from `delay_rng`.
    ///
    /// A normal variate is consumed even when `sigma = 0` so the noise stream
    /// advances identically for every noise level.
    pub fn draw_feedback<N, D>(
        &self,
        x: &Point,
        round: u64,
        noise_rng: &mut N,
        delay_rng: &mut D,
    ) -> Result<Feedback, ContractError>
    where
        N: Rng + ?Sized,
        D: Rng + ?Sized,
    {
        if round == 0 {
            return Err(ContractError::ZeroRound);
        }
        let mean = self.reward.mean(x)?;
        let z: f64 = StandardNormal.sample(noise_rng);
        Ok(Feedback { reward: mean + self.noise.sigma * z, delay: self.delay.sample(delay_rng) })
    }
}

#[derive(Debug)]
struct Pending<P> {
    due: u64,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Pending<P> {
    fn eq(&self, other: &Self) -> bool {
        (self.due, self.seq) == (other.due, other.seq)
    }
}

impl<P> Eq for Pending<P> {}

impl<P> PartialOrd for Pending<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Pending<P> {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest (due, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.due, other.seq).cmp(&(self.due, self.seq))
    }
}

/// Scheduled feedback ordered by `(due_round, insertion order)`.
#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Pending<P>>,
    next_seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_seq: 0 }
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Earliest due round still queued.
    pub fn next_due(&self) -> Option<u64> {
        self.heap.peek().map(|e| e.due)
    }

    /// Queues `payload` for round `issued_at + delay + 1`; a `Never` delay
    /// drops it. Returns the due round.
    pub fn schedule(&mut self, issued_at: u64, delay: Delay, payload: P) -> Result<Option<u64>, ContractError> {
        if issued_at == 0 {
            return Err(ContractError::ZeroRound);
        }
        let Delay::Rounds(tau) = delay else {
            return Ok(None);
        };
        let due = issued_at.saturating_add(tau).saturating_add(1);
        self.heap.push(Pending { due, seq: self.next_seq, payload });
        self.next_seq += 1;
        Ok(Some(due))
    }

    /// Removes every event due at or before `round`, in delivery order.
    pub fn pop_due(&mut self, round: u64) -> Vec<P> {
        let mut out = Vec::new();
        self.pop_due_into(round, &mut out);
        out
    }

    /// As [`EventQueue::pop_due`], appending to `out`.
    pub fn pop_due_into(&mut self, round: u64, out: &mut Vec<P>) {
        while self.heap.peek().is_some_and(|e| e.due <= round) {
            out.push(self.heap.pop().expect("peeked").payload);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn mean_reward_examples() {
        assert_eq!(RewardFunction::triangle().mean(&p(&[0.4])).unwrap(), 0.8);
        assert_abs_diff_eq!(RewardFunction::sine().mean(&p(&[0.3])).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        let expected = 1.0 - 0.4 * libm::sqrt(0.49 + 0.49);
        assert_abs_diff_eq!(RewardFunction::two_dim().mean(&p(&[0.7, 0.8])).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.604021, epsilon = 1e-6);
        assert!(RewardFunction::triangle().mean(&p(&[0.1, 0.2])).is_err());
    }

    #[test]
    fn optima_match_dense_scan() {
        for f in [RewardFunction::triangle(), RewardFunction::sine()] {
            let scan = (0..=100_000).map(|k| f.mean_unchecked(&[k as f64 / 100_000.0])).fold(f64::MIN, f64::max);
            assert!(f.optimum() >= scan - 1e-12, "{f:?}");
            assert!(f.optimum() - scan < 1e-6, "{f:?}");
        }
        let f = RewardFunction::two_dim();
        let mut scan = f64::MIN;
        for i in 0..=400 {
            for j in 0..=400 {
                scan = scan.max(f.mean_unchecked(&[i as f64 / 400.0, j as f64 / 400.0]));
            }
        }
        assert!(f.optimum() >= scan);
        assert_eq!(f.optimum(), f.mean_unchecked(&[0.7, 0.8]));
        let maxima: Vec<f64> = RewardFunction::sine().maximizers().iter().map(|m| m.coords()[0]).collect();
        assert_eq!(maxima.len(), 2);
        assert_abs_diff_eq!(maxima[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(maxima[1], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn builtin_means_in_unit_interval() {
        for f in [RewardFunction::triangle(), RewardFunction::sine()] {
            for k in 0..=1000 {
                let v = f.mean_unchecked(&[k as f64 / 1000.0]);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let f = RewardFunction::two_dim();
        for i in 0..=100 {
            for j in 0..=100 {
                // The corner (1, 0) sits just below zero.
                let v = f.mean_unchecked(&[i as f64 / 100.0, j as f64 / 100.0]);
                assert!((-1e-4..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn draw_feedback_examples() {
        let mut noise = ChaCha8Rng::seed_from_u64(1);
        let mut delays = ChaCha8Rng::seed_from_u64(2);
        let env = Environment {
            reward: RewardFunction::triangle(),
            noise: NoiseModel::new(0.0).unwrap(),
            delay: DelayDistribution::Zero,
        };
        let fb = env.draw_feedback(&p(&[0.4]), 1, &mut noise, &mut delays).unwrap();
        assert_eq!(fb, Feedback { reward: 0.8, delay: Delay::Rounds(0) });
        assert!(env.draw_feedback(&p(&[0.4]), 0, &mut noise, &mut delays).is_err());

        let env = Environment {
            delay: DelayDistribution::FixedOrInfinite { tau0: 30, prob_finite: 1.0 },
            ..env
        };
        for k in 0..100 {
            let x = p(&[k as f64 / 100.0]);
            assert_eq!(env.draw_feedback(&x, 5, &mut noise, &mut delays).unwrap().delay, Delay::Rounds(30));
        }

        let env = Environment { noise: NoiseModel::new(0.1).unwrap(), ..env };
        let x = p(&[0.7]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| env.draw_feedback(&x, 1, &mut noise, &mut delays).unwrap().reward)
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean, env.reward.mean(&x).unwrap(), epsilon = 0.002);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(DelayDistribution::Zero.quantile(0.99).unwrap(), Delay::Rounds(0));
        assert_eq!(DelayDistribution::UniformInt { lo: 0, hi: 40 }.quantile(0.5).unwrap(), Delay::Rounds(20));
        let geo = DelayDistribution::Geometric { success_prob: 1.0 / 21.0 };
        assert_eq!(geo.quantile(0.5).unwrap(), Delay::Rounds(14));
        assert_eq!(geo.quantile(1.0).unwrap(), Delay::Never);
        let fi = DelayDistribution::FixedOrInfinite { tau0: 30, prob_finite: 0.6 };
        assert_eq!(fi.quantile(0.6).unwrap(), Delay::Rounds(30));
        assert_eq!(fi.quantile(0.61).unwrap(), Delay::Never);
        assert_eq!(DelayDistribution::UniformInt { lo: 3, hi: 7 }.quantile(1.0).unwrap(), Delay::Rounds(7));
        assert!(geo.quantile(0.0).is_err());
    }

    /// Brute-force quantile by walking the cdf from 0.
    fn walk_quantile(d: &DelayDistribution, p: f64) -> u64 {
        (0..).find(|&n| d.cdf(n) >= p).unwrap()
    }

    #[test]
    fn quantile_matches_cdf_walk() {
        let dists = [
            DelayDistribution::uniform_with_mean(20),
            DelayDistribution::uniform_with_mean(50),
            DelayDistribution::UniformInt { lo: 5, hi: 9 },
            DelayDistribution::geometric_with_mean(20.0).unwrap(),
            DelayDistribution::geometric_with_mean(50.0).unwrap(),
            DelayDistribution::Geometric { success_prob: 0.5 },
        ];
        for d in &dists {
            for k in 1..=99 {
                let p = k as f64 / 100.0;
                assert_eq!(d.quantile(p).unwrap(), Delay::Rounds(walk_quantile(d, p)), "{d:?} p={p}");
            }
        }
    }

    #[test]
    fn quantile_matches_empirical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dists = [
            DelayDistribution::uniform_with_mean(20),
            DelayDistribution::geometric_with_mean(50.0).unwrap(),
            DelayDistribution::FixedOrInfinite { tau0: 30, prob_finite: 0.7 },
        ];
        let n = 1_000_000;
        for d in &dists {
            let mut samples: Vec<Delay> = (0..n).map(|_| d.sample(&mut rng)).collect();
            samples.sort();
            for p in [0.1, 0.25, 0.5, 0.75, 0.9] {
                let empirical = samples[libm::ceil(p * n as f64) as usize - 1];
                match (d.quantile(p).unwrap(), empirical) {
                    (Delay::Rounds(a), Delay::Rounds(b)) => assert!(a.abs_diff(b) <= 1, "{d:?} p={p}: {a} vs {b}"),
                    (a, b) => assert_eq!(a, b, "{d:?} p={p}"),
                }
            }
        }
    }

    #[test]
    fn geometric_mean_parameterization() {
        let d = DelayDistribution::geometric_with_mean(20.0).unwrap();
        assert_eq!(d, DelayDistribution::Geometric { success_prob: 1.0 / 21.0 });
        assert_abs_diff_eq!(d.mean().unwrap(), 20.0, epsilon = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mean = (0..n)
            .map(|_| match d.sample(&mut rng) {
                Delay::Rounds(k) => k as f64,
                Delay::Never => unreachable!(),
            })
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean, 20.0, epsilon = 0.3);
        assert_eq!(DelayDistribution::uniform_with_mean(50), DelayDistribution::UniformInt { lo: 0, hi: 100 });
    }

    #[test]
    fn invalid_delays_rejected() {
        assert!(DelayDistribution::UniformInt { lo: 3, hi: 2 }.validate().is_err());
        assert!(DelayDistribution::Geometric { success_prob: 0.0 }.validate().is_err());
        assert!(DelayDistribution::FixedOrInfinite { tau0: 1, prob_finite: 1.5 }.validate().is_err());
        assert!(NoiseModel::new(-0.1).is_err());
    }

    #[test]
    fn schedule_examples() {
        let mut q = EventQueue::new();
        assert_eq!(q.schedule(5, Delay::Rounds(0), 'a').unwrap(), Some(6));
        assert_eq!(q.schedule(5, Delay::Never, 'b').unwrap(), None);
        assert_eq!(q.len(), 1);
        assert_eq!(q.schedule(10, Delay::Rounds(30), 'c').unwrap(), Some(41));
        assert!(q.schedule(0, Delay::Rounds(1), 'd').is_err());
    }

    #[test]
    fn pop_due_examples() {
        let mut q: EventQueue<u32> = EventQueue::new();
        assert!(q.pop_due(3).is_empty());
        q.schedule(2, Delay::Rounds(5), 1).unwrap(); // due 8
        q.schedule(1, Delay::Rounds(4), 2).unwrap(); // due 6
        q.schedule(3, Delay::Rounds(2), 3).unwrap(); // due 6
        assert_eq!(q.pop_due(6), vec![2, 3]);
        assert_eq!(q.pop_due(7), Vec::<u32>::new());
        assert_eq!(q.pop_due(8), vec![1]);

        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(5, Delay::Rounds(0), 1).unwrap();
        q.schedule(5, Delay::Rounds(1), 2).unwrap();
        assert_eq!(q.pop_due(7), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn delivery_exactly_at_s_tau_plus_one(
            events in proptest::collection::vec((1u64..200, 0u64..60), 1..80)
        ) {
            let mut q = EventQueue::new();
            for (i, &(s, tau)) in events.iter().enumerate() {
                q.schedule(s, Delay::Rounds(tau), i).unwrap();
            }
            let mut seen = vec![None; events.len()];
            let mut last = (0u64, 0usize);
            for t in 1..=300u64 {
                for i in q.pop_due(t) {
                    prop_assert!(seen[i].is_none());
                    seen[i] = Some(t);
                    let due = events[i].0 + events[i].1 + 1;
                    // Nondecreasing due rounds, FIFO within a round.
                    prop_assert!((due, i) > last || last == (0, 0));
                    last = (due, i);
                }
            }
            for (i, &(s, tau)) in events.iter().enumerate() {
                prop_assert_eq!(seen[i], Some(s + tau + 1));
            }
        }
    }
}
