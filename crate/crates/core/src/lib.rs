//! Distributed resource allocation for the uplink of a multicarrier (OFDMA) cell.
//!
//! Each user must be served a target bit rate on a subset of `F` orthogonal
//! subchannels, picking one discrete transmission format per subchannel, so
//! that the total transmitted power is minimized while every subchannel is
//! used by at most one user and nobody exceeds its power cap.
//!
//! The solver runs min-sum message passing on a factor graph with one
//! exclusivity node per subchannel and one rate/power node per user. The
//! user-node messages are computed exactly by a knapsack-style dynamic
//! program ([`dp`]), so a terminal only ever solves small local problems.
//! The crate also ships a statistically faithful frequency-selective
//! Rayleigh channel ([`channel`]), two classic centralized baselines
//! ([`baselines`]) and brute-force reference solvers ([`oracle`]) used to
//! validate everything else.
//!
//! The crate is `no_std` (allocation required): the per-terminal math has no
//! IO and can run on embedded targets. Simulation drivers, file formats and
//! the CLI live in the companion `ramp-sim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod channel;
pub mod cost;
pub mod dp;
pub mod format;
pub mod mp;
pub mod oracle;
pub mod problem;

pub(crate) mod assignment;

use alloc::string::String;

pub use cost::Cost;
pub use format::FormatSet;
pub use problem::{Allocation, CandidateSets, ProblemInstance};

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration data.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// A format index above `Q`.
    #[error("format index {q} out of range (max {max})")]
    FormatOutOfRange { q: usize, max: usize },
    /// An oracle refused to enumerate a search space above its guard.
    #[error("search space of {size} states exceeds the oracle guard of {guard}")]
    SearchSpaceExceeded { size: u128, guard: u128 },
}

pub type Result<T> = core::result::Result<T, Error>;
