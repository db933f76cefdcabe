//! Toolkit for distributed power control under partial channel-state
//! information.
//!
//! The crate revolves around a discrete team-decision problem: `K`
//! transmitters pick per-band power vectors from finite alphabets, each one
//! seeing only a partial (possibly noisy) signal about the global channel
//! state, and the figure of merit is the expected value of an instantaneous
//! utility (energy efficiency or Shannon rate) over the block-fading law.
//!
//! - [`model`] — scenarios, alphabets, SINR and utility functions.
//! - [`observe`] — maximum-entropy gain quantization and observation
//!   structures (global / direct / local / individual / noisy CSI).
//! - [`problem`] — bundles a scenario, channel model, observation structure
//!   and utility into one [`problem::TeamProblem`].
//! - [`synth`] — expected-utility evaluation and sequential best-response
//!   synthesis of per-transmitter decision functions.
//! - [`region`] — long-term utility region machinery: vertex enumeration,
//!   Pareto frontier sweeps, QoS-constrained mixtures over an auxiliary
//!   lottery, and empirical factorization checks.
//! - [`baselines`] — classical comparison policies (target-SINR channel
//!   inversion, iterative water-filling, binary power control with channel
//!   selection, full power).
//! - [`eval`] — Monte Carlo evaluation of any policy over continuous
//!   block-fading channels with common random numbers.

pub mod baselines;
pub mod eval;
pub mod lp;
pub mod model;
mod numeric;
pub mod observe;
pub mod problem;
pub mod region;
pub mod synth;

#[doc(hidden)]
pub mod testkit;
