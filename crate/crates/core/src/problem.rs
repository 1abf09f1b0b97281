//! Problem data model: instances, allocations, candidate sets and the
//! exclusivity / per-user cost functions that make up the global objective.
//!
//! An allocation is feasible when every subchannel carries at most one
//! active user, every user reaches its demanded rate, and nobody exceeds
//! its power cap; its cost is then the total transmitted power. Violations
//! cost [`Cost::INFINITE`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::Cost;
use crate::format::FormatSet;
use crate::{Error, Result};

/// One uplink allocation problem: geometry-independent once the gains are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    num_users: usize,
    num_subchannels: usize,
    /// Subchannel bandwidth B in Hz.
    subchannel_bandwidth: f64,
    /// Noise power spectral density N0 (relative units).
    noise_psd: f64,
    /// Power gains |H_{n,f}|², row-major N×F, path loss included.
    gains: Vec<f64>,
    /// Demanded rate b_n in bit/s, one per user.
    rate_demands: Vec<f64>,
    /// Power cap per user in relative power units; `+∞` relaxes the cap.
    power_caps: Vec<f64>,
    formats: FormatSet,
}

impl ProblemInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_users: usize,
        num_subchannels: usize,
        subchannel_bandwidth: f64,
        noise_psd: f64,
        gains: Vec<f64>,
        rate_demands: Vec<f64>,
        power_caps: Vec<f64>,
        formats: FormatSet,
    ) -> Result<ProblemInstance> {
        if num_users == 0 || num_subchannels == 0 {
            return Err(Error::InvalidConfig("need at least one user and one subchannel".into()));
        }
        if gains.len() != num_users * num_subchannels {
            return Err(Error::InvalidConfig(format!(
                "gain matrix has {} entries, expected {}x{}",
                gains.len(),
                num_users,
                num_subchannels
            )));
        }
        if rate_demands.len() != num_users || power_caps.len() != num_users {
            return Err(Error::InvalidConfig(format!(
                "expected {} rate demands and power caps, got {} and {}",
                num_users,
                rate_demands.len(),
                power_caps.len()
            )));
        }
        if !(subchannel_bandwidth.is_finite() && subchannel_bandwidth > 0.0) {
            return Err(Error::InvalidConfig("subchannel bandwidth must be positive".into()));
        }
        if !(noise_psd.is_finite() && noise_psd > 0.0) {
            return Err(Error::InvalidConfig("noise PSD must be positive".into()));
        }
        if gains.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return Err(Error::InvalidConfig("all channel gains must be finite and positive".into()));
        }
        if rate_demands.iter().any(|&b| !(b.is_finite() && b >= 0.0)) {
            return Err(Error::InvalidConfig("rate demands must be finite and nonnegative".into()));
        }
        if power_caps.iter().any(|&p| p.is_nan() || p <= 0.0) {
            return Err(Error::InvalidConfig("power caps must be positive (+inf allowed)".into()));
        }
        Ok(ProblemInstance {
            num_users,
            num_subchannels,
            subchannel_bandwidth,
            noise_psd,
            gains,
            rate_demands,
            power_caps,
            formats,
        })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn num_subchannels(&self) -> usize {
        self.num_subchannels
    }

    #[inline]
    pub fn subchannel_bandwidth(&self) -> f64 {
        self.subchannel_bandwidth
    }

    #[inline]
    pub fn noise_psd(&self) -> f64 {
        self.noise_psd
    }

    /// Noise power per subchannel, `B·N0`.
    #[inline]
    pub fn noise_power(&self) -> f64 {
        self.subchannel_bandwidth * self.noise_psd
    }

    #[inline]
    pub fn formats(&self) -> &FormatSet {
        &self.formats
    }

    #[inline]
    pub fn gain(&self, user: usize, subchannel: usize) -> f64 {
        self.gains[user * self.num_subchannels + subchannel]
    }

    #[inline]
    pub fn rate_demand(&self, user: usize) -> f64 {
        self.rate_demands[user]
    }

    #[inline]
    pub fn power_cap(&self, user: usize) -> f64 {
        self.power_caps[user]
    }

    /// Rate carried by one subchannel at format `q`, `B·η_q`.
    #[inline]
    pub fn rate_of_format(&self, q: usize) -> f64 {
        self.subchannel_bandwidth * self.formats.efficiency(q)
    }

    /// Power needed by `user` to run format `q` on `subchannel`:
    /// `SNR(q)·B·N0 / |H|²`. Exactly `0` for `q = 0`.
    #[inline]
    pub fn power_required(&self, user: usize, subchannel: usize, q: usize) -> f64 {
        let snr = self.formats.snr(q);
        if snr == 0.0 {
            return 0.0;
        }
        snr * self.noise_power() / self.gain(user, subchannel)
    }

    /// Same instance with every user's power cap replaced.
    pub fn with_power_caps(&self, power_caps: Vec<f64>) -> Result<ProblemInstance> {
        ProblemInstance::new(
            self.num_users,
            self.num_subchannels,
            self.subchannel_bandwidth,
            self.noise_psd,
            self.gains.clone(),
            self.rate_demands.clone(),
            power_caps,
            self.formats.clone(),
        )
    }

    /// Same instance with every user's rate demand replaced.
    pub fn with_rate_demands(&self, rate_demands: Vec<f64>) -> Result<ProblemInstance> {
        ProblemInstance::new(
            self.num_users,
            self.num_subchannels,
            self.subchannel_bandwidth,
            self.noise_psd,
            self.gains.clone(),
            rate_demands,
            self.power_caps.clone(),
            self.formats.clone(),
        )
    }
}

/// A decision matrix: one format index per (user, subchannel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    num_users: usize,
    num_subchannels: usize,
    formats: Vec<u8>,
}

impl Allocation {
    pub fn silent(num_users: usize, num_subchannels: usize) -> Allocation {
        Allocation {
            num_users,
            num_subchannels,
            formats: vec![0; num_users * num_subchannels],
        }
    }

    #[inline]
    pub fn get(&self, user: usize, subchannel: usize) -> u8 {
        self.formats[user * self.num_subchannels + subchannel]
    }

    #[inline]
    pub fn set(&mut self, user: usize, subchannel: usize, q: u8) {
        self.formats[user * self.num_subchannels + subchannel] = q;
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn num_subchannels(&self) -> usize {
        self.num_subchannels
    }

    /// Row of formats for one user.
    pub fn user_row(&self, user: usize) -> &[u8] {
        let start = user * self.num_subchannels;
        &self.formats[start..start + self.num_subchannels]
    }

    /// Total transmitted power of the allocation, constraints ignored.
    /// Summed user-major then channel-major so equal allocations always
    /// produce bit-identical totals.
    pub fn total_power(&self, instance: &ProblemInstance) -> f64 {
        let mut total = 0.0;
        for n in 0..self.num_users {
            for f in 0..self.num_subchannels {
                let q = self.get(n, f) as usize;
                if q > 0 {
                    total += instance.power_required(n, f, q);
                }
            }
        }
        total
    }
}

/// Per-user candidate subchannel lists, gain-sorted best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSets {
    sets: Vec<Vec<usize>>,
}

impl CandidateSets {
    /// Builds the top-`p` candidate set of every user over all subchannels.
    pub fn best_for_all(instance: &ProblemInstance, p: usize) -> CandidateSets {
        let excluded = vec![false; instance.num_subchannels()];
        let sets = (0..instance.num_users())
            .map(|n| candidate_set(instance, n, p, &excluded))
            .collect();
        CandidateSets { sets }
    }

    pub fn from_sets(sets: Vec<Vec<usize>>) -> CandidateSets {
        CandidateSets { sets }
    }

    #[inline]
    pub fn user(&self, n: usize) -> &[usize] {
        &self.sets[n]
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.sets.len()
    }

    /// Users that may transmit on `subchannel` (the neighborhood N(f)).
    pub fn users_of_subchannel(&self, subchannel: usize) -> Vec<usize> {
        (0..self.sets.len())
            .filter(|&n| self.sets[n].contains(&subchannel))
            .collect()
    }
}

/// The `p` largest-gain subchannels of `user` among those not excluded,
/// descending gain, ties broken by the lower subchannel index. Returns all
/// eligible subchannels when fewer than `p` remain; empty means the caller
/// should treat the user as blocked.
pub fn candidate_set(
    instance: &ProblemInstance,
    user: usize,
    p: usize,
    excluded: &[bool],
) -> Vec<usize> {
    debug_assert_eq!(excluded.len(), instance.num_subchannels());
    let mut eligible: Vec<usize> = (0..instance.num_subchannels())
        .filter(|&f| !excluded[f])
        .collect();
    eligible.sort_by(|&a, &b| {
        instance
            .gain(user, b)
            .partial_cmp(&instance.gain(user, a))
            .expect("gains are finite")
            .then(a.cmp(&b))
    });
    eligible.truncate(p);
    eligible
}

/// Indicator I(q): 1 if the format is active (1 ≤ q ≤ Q), else 0.
#[inline]
pub fn is_active(q: u8) -> bool {
    q > 0
}

/// Exclusivity cost C(f) of one subchannel: `0` when at most one of the
/// competing users is active, `+∞` otherwise.
pub fn exclusivity_cost(formats_on_subchannel: &[u8]) -> Cost {
    let active = formats_on_subchannel.iter().filter(|&&q| is_active(q)).count();
    if active <= 1 {
        Cost::ZERO
    } else {
        Cost::INFINITE
    }
}

/// User cost W(n) over the user's candidate set: the transmitted power when
/// the rate demand is met within the power cap, `+∞` otherwise.
pub fn user_cost(instance: &ProblemInstance, user: usize, candidates: &[usize], row: &[u8]) -> Cost {
    let mut power = 0.0;
    let mut rate = 0.0;
    for (f, q) in candidates.iter().zip(row) {
        let q = *q as usize;
        power += instance.power_required(user, *f, q);
        rate += instance.rate_of_format(q);
    }
    if rate >= instance.rate_demand(user) && power <= instance.power_cap(user) {
        Cost::new(power)
    } else {
        Cost::INFINITE
    }
}

/// Global objective of Eqs.-style min-sum form: the sum of all exclusivity
/// and user costs. Finite exactly when the allocation is feasible, in which
/// case it equals the total transmitted power. Allocations that transmit
/// outside a user's candidate set cost `+∞`.
pub fn global_cost(
    instance: &ProblemInstance,
    candidates: &CandidateSets,
    allocation: &Allocation,
) -> Cost {
    for n in 0..instance.num_users() {
        for f in 0..instance.num_subchannels() {
            if is_active(allocation.get(n, f)) && !candidates.user(n).contains(&f) {
                return Cost::INFINITE;
            }
        }
    }
    let mut total = Cost::ZERO;
    for f in 0..instance.num_subchannels() {
        let users = candidates.users_of_subchannel(f);
        let column: Vec<u8> = users.iter().map(|&n| allocation.get(n, f)).collect();
        total += exclusivity_cost(&column);
    }
    for n in 0..instance.num_users() {
        let cands = candidates.user(n);
        let row: Vec<u8> = cands.iter().map(|&f| allocation.get(n, f)).collect();
        total += user_cost(instance, n, cands, &row);
    }
    total
}
