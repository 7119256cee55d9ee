//! Imitation-based spectrum access for cognitive radio networks.
//!
//! A population of `N` secondary users (SUs) opportunistically shares `C`
//! licensed channels, channel `i` being free of primary-user activity with
//! probability `mu[i]`. Each SU repeatedly imitates better-off peers:
//! proportional imitation samples one peer and switches with probability
//! proportional to the payoff gap, double imitation samples two peers and
//! weighs the gaps. This crate provides
//!
//! * [`model`]: the underlying congestion game, with payoffs, the unique
//!   Nash equilibrium, the potential function, epsilon-equilibrium tests
//!   and the Jain fairness index;
//! * [`policies`]: the finite-population step rules (PISAP, DISAP) with
//!   global or same-channel sampling scopes;
//! * [`dynamics`]: the mean-field companions, from the replicator and
//!   aggregate monotone flows with closed forms to the exact
//!   channel-constrained migration-matrix maps and their interleaved
//!   two-track approximations;
//! * [`sim`]: a deterministic, seedable Monte Carlo engine with batch
//!   aggregation;
//! * [`reproduce`]: the pinned-seed experiments backing the acceptance
//!   suite and the `reproduce` CLI subcommand;
//! * [`cli`]: configuration parsing and the file-emitting subcommands.

pub mod cli;
pub mod dynamics;
pub mod model;
pub mod policies;
pub mod reproduce;
pub mod rng;
pub mod sim;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A channel model violated its invariants (size, probability range).
    #[error("invalid channel model: {0}")]
    InvalidChannels(String),
    /// An argument was outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value failed validation; the message names the key.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Numerical integration produced NaN or left the admissible region.
    #[error("integration diverged: {0}")]
    Diverged(String),
    /// The operation is not defined for the given setup.
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
