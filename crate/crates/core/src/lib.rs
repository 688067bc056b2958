//! Lipschitz bandits with stochastic delayed feedback.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic piece
//! of the simulator:
//!
//! - [`metric`]: the unit cube under the sup metric, covering oracles and an
//!   incremental covering grid used by the zooming policy.
//! - [`environment`]: reward functions, noise, delay distributions and the
//!   discrete-event feedback queue.
//! - [`zooming`]: the delayed zooming policy with its lazy-update cache.
//! - [`dlpp`]: phased round-robin sampling with elimination and dyadic
//!   refinement (delayed Lipschitz phased pruning).
//! - [`experiment`]: trial configuration, seeding, dispatch and aggregation.
//! - [`verification`]: independent reference implementations and invariant
//!   monitors.
//!
//! File formats, the CLI and parallel execution live in the `lipdelay` crate.

#![no_std]
#![allow(clippy::int_plus_one, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dlpp;
pub mod environment;
mod error;
pub mod experiment;
pub mod metric;
pub mod verification;
pub mod zooming;

pub use error::{ConfigError, ContractError, Error};

/// `4 ln T + 2 ln(2/δ)`, the log factor shared by the confidence radius and
/// the per-phase sample budget.
pub fn log_factor(horizon: u64, delta: f64) -> f64 {
    4.0 * libm::log(horizon as f64) + 2.0 * libm::log(2.0 / delta)
}
