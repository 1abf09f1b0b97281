//! Iterative min-sum message passing over the allocation factor graph.
//!
//! The graph has one variable node per (user, candidate subchannel) pair,
//! one exclusivity node per subchannel (resolved at the base station) and
//! one rate/power node per user (resolved at the terminal). Variable nodes
//! have degree two, so forwarding is a copy and every message is a
//! `(Q+1)`-vector of extended-real costs indexed by transmission format.
//!
//! One outer cycle refreshes candidate sets over the still-unreserved
//! subchannels, floods `I` inner rounds of messages, lets every user claim
//! the edges whose belief argmin is a nonzero format, and has the base
//! station arbitrate conflicting claims. Granted subchannels are reserved,
//! residual demands shrink, and fulfilled users drop out; the loop ends
//! when everyone is fulfilled, progress stalls, or the cycle budget runs
//! out (remaining users are in outage).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::Cost;
use crate::dp::{self, rate_floor_units, DpTable, RestrictedProblem, SingleUserProblem};
use crate::problem::{candidate_set, Allocation, ProblemInstance};

/// A message along one factor-graph edge: one cost per format.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    values: Vec<Cost>,
}

impl Message {
    pub fn zero(num_formats: usize) -> Message {
        Message { values: vec![Cost::ZERO; num_formats] }
    }

    pub fn infinite(num_formats: usize) -> Message {
        Message { values: vec![Cost::INFINITE; num_formats] }
    }

    pub fn from_costs(values: Vec<Cost>) -> Message {
        Message { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, q: usize) -> Cost {
        self.values[q]
    }

    #[inline]
    pub fn set(&mut self, q: usize, value: Cost) {
        self.values[q] = value;
    }

    pub fn values(&self) -> &[Cost] {
        &self.values
    }

    /// Entrywise sum of two messages.
    pub fn plus(&self, other: &Message) -> Message {
        debug_assert_eq!(self.len(), other.len());
        Message {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    /// Subtracts the minimum finite entry from every entry so the smallest
    /// entry becomes zero; the argmin is unchanged. Returns `false` and
    /// leaves the message untouched when every entry is infinite.
    pub fn normalize(&mut self) -> bool {
        let min = self.values.iter().copied().fold(Cost::INFINITE, Cost::min);
        if min.is_infinite() {
            return false;
        }
        if min.raw() != 0.0 {
            for v in &mut self.values {
                *v = Cost::new(v.raw() - min.raw());
            }
        }
        true
    }

    /// Index of the smallest entry, ties to the lowest format; `None` when
    /// every entry is infinite.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (q, v) in self.values.iter().enumerate() {
            if v.is_infinite() {
                continue;
            }
            match best {
                Some((_, b)) if v.raw() >= b => {}
                _ => best = Some((q, v.raw())),
            }
        }
        best.map(|(q, _)| q)
    }

    /// Decision confidence: second-smallest entry minus smallest. Zero when
    /// everything is infinite, `+∞` when only one entry is finite.
    pub fn margin(&self) -> f64 {
        let mut smallest = f64::INFINITY;
        let mut second = f64::INFINITY;
        for v in &self.values {
            let x = v.raw();
            if x < smallest {
                second = smallest;
                smallest = x;
            } else if x < second {
                second = x;
            }
        }
        if smallest.is_infinite() {
            0.0
        } else {
            second - smallest
        }
    }
}

/// Message-passing schedule parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MpConfig {
    /// Inner flooding rounds `I` per cycle (≥ 1).
    pub inner_iterations: usize,
    /// Outer cycle budget before undecided users are declared in outage.
    pub max_outer_cycles: usize,
    /// Candidate set size `P` per user (≥ 1).
    pub candidate_size: usize,
    /// Normalize messages (shift so the minimum entry is zero) after every
    /// update.
    pub normalization: bool,
    /// Damping factor λ ∈ [0, 1): new = (1−λ)·computed + λ·previous.
    pub damping: f64,
}

impl Default for MpConfig {
    fn default() -> MpConfig {
        MpConfig {
            // Enough rounds for the claim dynamics to settle on large
            // windows; the fixed-point exit stops converged cycles early.
            inner_iterations: 80,
            max_outer_cycles: 10,
            candidate_size: 4,
            normalization: true,
            // Light damping breaks claim oscillations on cyclic graphs.
            damping: 0.2,
        }
    }
}

impl MpConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.inner_iterations == 0 || self.max_outer_cycles == 0 || self.candidate_size == 0 {
            return Err(crate::Error::InvalidConfig(
                "inner_iterations, max_outer_cycles and candidate_size must all be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(crate::Error::InvalidConfig("damping must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Final status of one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserStatus {
    Fulfilled,
    Outage,
}

/// Outcome of a full message-passing run.
#[derive(Debug, Clone, PartialEq)]
pub struct MpResult {
    pub allocation: Allocation,
    pub status: Vec<UserStatus>,
    /// Total granted transmit power.
    pub total_power: f64,
    pub outer_cycles_used: usize,
}

impl MpResult {
    pub fn all_fulfilled(&self) -> bool {
        self.status.iter().all(|&s| s == UserStatus::Fulfilled)
    }

    pub fn any_outage(&self) -> bool {
        self.status.contains(&UserStatus::Outage)
    }
}

/// Which update produced a traced message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageDirection {
    /// User (rate/power) node towards a variable node.
    WNodeToVariable,
    /// Exclusivity node towards a variable node.
    CNodeToVariable,
}

/// One traced message, borrowed from the engine.
#[derive(Debug)]
pub struct TraceEvent<'a> {
    pub outer_cycle: usize,
    pub inner_round: usize,
    pub user: usize,
    pub subchannel: usize,
    pub direction: MessageDirection,
    pub values: &'a [Cost],
}

/// Observer for per-round messages.
pub trait TraceSink {
    fn on_message(&mut self, event: &TraceEvent<'_>);
}

/// Sink that drops everything.
pub struct NoTrace;

impl TraceSink for NoTrace {
    fn on_message(&mut self, _: &TraceEvent<'_>) {}
}

/// Exclusivity-node update: the message towards `incoming[target]`.
///
/// Closed form of the constrained minimization: with at most one active
/// transmitter allowed on the subchannel, entry `q ≥ 1` forces all other
/// users silent (the sum of their format-0 entries) and entry `0`
/// additionally allows exactly one other user to transmit at its cheapest
/// nonzero format. Runs in O(|N(ℓ)|·Q).
pub fn c_node_update(incoming: &[Message], target: usize) -> Message {
    let num_formats = incoming[target].len();
    // Sum of the other users' format-0 entries, tracking infinities apart
    // so single-user exclusions never subtract ∞ from ∞.
    let mut finite_sum = 0.0;
    let mut infinite_zeros = 0usize;
    for (i, m) in incoming.iter().enumerate() {
        if i == target {
            continue;
        }
        let z = m.get(0);
        if z.is_infinite() {
            infinite_zeros += 1;
        } else {
            finite_sum += z.raw();
        }
    }
    let all_silent = if infinite_zeros > 0 { Cost::INFINITE } else { Cost::new(finite_sum) };

    let mut out = Message::infinite(num_formats);
    for q in 1..num_formats {
        out.set(q, all_silent);
    }

    let mut best = all_silent;
    for (i, m) in incoming.iter().enumerate() {
        if i == target {
            continue;
        }
        let mut min_active = Cost::INFINITE;
        for h in 1..m.len() {
            min_active = min_active.min(m.get(h));
        }
        if min_active.is_infinite() {
            continue;
        }
        let zero = m.get(0);
        let others_silent = if infinite_zeros == 0 {
            Cost::new(finite_sum - zero.raw())
        } else if infinite_zeros == 1 && zero.is_infinite() {
            Cost::new(finite_sum)
        } else {
            Cost::INFINITE
        };
        best = best.min(others_silent + min_active);
    }
    out.set(0, best);
    out
}

/// Exclusivity-node messages (and their damped blends) always satisfy
/// `m(0) ≤ m(1) = … = m(Q)`: being allowed to stay silent is never worse
/// and every active format faces the same competition.
fn is_c_structured(message: &Message) -> bool {
    let first_active = message.get(1);
    if message.get(0).raw() > first_active.raw() {
        return false;
    }
    (2..message.len()).all(|q| message.get(q) == first_active)
}

/// Exact capped completion for structured incoming messages.
///
/// With `m(0) ≤ m(1) = … = m(Q)` the cost of activating channel `f` at
/// format `h` over leaving it silent is `δ_f(h) = P_f(h) + m_f(1) − m_f(0)
/// ≥ 0` and strictly increasing in `h`, so some optimal completion
/// activates at most `d` channels with format indices summing to exactly
/// `d`. Enumerating those compositions checks the real-valued power budget
/// directly, with no quantization. Entries are the all-silent base plus
/// the cheapest in-budget upgrade for the queried rate floor.
struct StructuredCompletion {
    /// Σ m_f(0): cost of the all-silent completion (may be infinite).
    base: Cost,
    /// Per usable channel: (δ per active format h=1.., powers per format).
    upgrades: Vec<(Vec<f64>, Vec<f64>)>,
}

impl StructuredCompletion {
    fn build(
        instance: &ProblemInstance,
        user: usize,
        candidates: &[usize],
        target_pos: usize,
        incoming: &[Message],
    ) -> StructuredCompletion {
        let num_formats = instance.formats().num_formats();
        let mut base = Cost::ZERO;
        let mut upgrades = Vec::with_capacity(candidates.len() - 1);
        for (pos, &f) in candidates.iter().enumerate() {
            if pos == target_pos {
                continue;
            }
            let silent = incoming[pos].get(0);
            base += silent;
            let active = incoming[pos].get(1);
            if !silent.is_finite() || !active.is_finite() {
                // All-infinite channels poison the base; silent-only
                // channels simply offer no upgrades.
                continue;
            }
            let offset = active.raw() - silent.raw();
            let mut deltas = Vec::with_capacity(num_formats - 1);
            let mut powers = Vec::with_capacity(num_formats - 1);
            for h in 1..num_formats {
                let p = instance.power_required(user, f, h);
                deltas.push(p + offset);
                powers.push(p);
            }
            upgrades.push((deltas, powers));
        }
        StructuredCompletion { base, upgrades }
    }

    /// Cheapest upgrade cost reaching exactly `rate_units` more format
    /// units within `budget` real power; `+∞` when impossible.
    fn best_upgrade(&self, rate_units: usize, budget: f64) -> f64 {
        if rate_units == 0 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        self.search(0, rate_units, budget, 0.0, &mut best);
        best
    }

    fn search(&self, from: usize, remaining: usize, budget: f64, spent: f64, best: &mut f64) {
        let q_top = self.upgrades.first().map_or(0, |(d, _)| d.len());
        if (self.upgrades.len() - from) * q_top < remaining {
            return;
        }
        for channel in from..self.upgrades.len() {
            let (deltas, powers) = &self.upgrades[channel];
            for h in 1..=deltas.len().min(remaining) {
                let cost = spent + deltas[h - 1];
                if cost >= *best || powers[h - 1] > budget {
                    continue;
                }
                if h == remaining {
                    *best = cost;
                } else {
                    self.search(channel + 1, remaining - h, budget - powers[h - 1], cost, best);
                }
            }
        }
    }
}

/// User-node update: the message towards the edge `candidates[target_pos]`.
///
/// For every hypothesized format `q` on the target subchannel, the entry is
/// `P_{u,ν}(q)` plus the optimal completion on the remaining candidate
/// subchannels (power plus incoming message per format) that covers the
/// residual rate within the residual power cap. The incoming message on the
/// target edge itself is excluded (extrinsic rule). The completion problem
/// does not depend on `q` except through the rate floor and leftover
/// budget, so one dynamic-programming table (or structured search) answers
/// all `Q+1` entries.
pub fn w_node_update(
    instance: &ProblemInstance,
    user: usize,
    candidates: &[usize],
    target_pos: usize,
    incoming: &[Message],
    residual_rate: f64,
    power_cap: f64,
) -> Message {
    let formats = instance.formats();
    let num_formats = formats.num_formats();
    let q_top = formats.q_max();
    let nu = candidates[target_pos];
    let unit_rate = instance.subchannel_bandwidth() * formats.eta_step();
    let num_others = candidates.len() - 1;
    let reachable_units = q_top * num_others;
    let floor_q0 = rate_floor_units(residual_rate, unit_rate);

    // The cap cannot bind when even full-format transmission on the whole
    // candidate set stays below it; the budget dimension is then dropped.
    let cap_unreachable = power_cap.is_infinite() || {
        let mut full_blast = 0.0;
        for &f in candidates {
            full_blast += instance.power_required(user, f, q_top);
        }
        full_blast <= power_cap
    };

    let mut out = Message::infinite(num_formats);
    if cap_unreachable {
        let mut costs = Vec::with_capacity(num_others * num_formats);
        let mut powers = Vec::with_capacity(num_others * num_formats);
        for (pos, &f) in candidates.iter().enumerate() {
            if pos == target_pos {
                continue;
            }
            for h in 0..num_formats {
                let p = instance.power_required(user, f, h);
                costs.push(Cost::new(p) + incoming[pos].get(h));
                powers.push(p);
            }
        }
        let completion = SingleUserProblem {
            costs,
            powers,
            num_channels: num_others,
            num_formats,
            rate_floor: floor_q0.min(reachable_units),
            power_budget: power_cap,
        };
        let table = DpTable::fill_relaxed(&completion);
        for q in 0..num_formats {
            let floor_q = rate_floor_units(residual_rate - instance.rate_of_format(q), unit_rate);
            if floor_q > reachable_units {
                continue;
            }
            let own = instance.power_required(user, nu, q);
            out.set(q, Cost::new(own) + table.best(floor_q, 0));
        }
    } else if candidates
        .iter()
        .enumerate()
        .all(|(pos, _)| pos == target_pos || is_c_structured(&incoming[pos]))
    {
        // Exact capped completion without quantization.
        let sc = StructuredCompletion::build(instance, user, candidates, target_pos, incoming);
        for q in 0..num_formats {
            let own = instance.power_required(user, nu, q);
            if own > power_cap || !sc.base.is_finite() {
                continue;
            }
            let floor_q = rate_floor_units(residual_rate - instance.rate_of_format(q), unit_rate);
            if floor_q > reachable_units {
                continue;
            }
            let upgrade = sc.best_upgrade(floor_q, power_cap - own);
            if upgrade.is_finite() {
                out.set(q, Cost::new(own) + sc.base + Cost::new(upgrade));
            }
        }
    } else {
        let mut costs = Vec::with_capacity(num_others * num_formats);
        let mut powers = Vec::with_capacity(num_others * num_formats);
        for (pos, &f) in candidates.iter().enumerate() {
            if pos == target_pos {
                continue;
            }
            for h in 0..num_formats {
                let p = instance.power_required(user, f, h);
                costs.push(Cost::new(p) + incoming[pos].get(h));
                powers.push(p);
            }
        }
        let completion = SingleUserProblem {
            costs,
            powers,
            num_channels: num_others,
            num_formats,
            rate_floor: floor_q0.min(reachable_units),
            power_budget: power_cap,
        };
        let restricted = RestrictedProblem::from_real(&completion, dp::DEFAULT_POWER_RESOLUTION);
        let table = DpTable::fill(&restricted);
        for q in 0..num_formats {
            let own = instance.power_required(user, nu, q);
            if own > power_cap {
                continue;
            }
            let floor_q = rate_floor_units(residual_rate - instance.rate_of_format(q), unit_rate);
            if floor_q > reachable_units {
                continue;
            }
            let leftover = ((power_cap - own) * restricted.power_scale).max(0.0);
            let budget_q = dp::snap_floor(leftover).min(restricted.budget_units as f64) as usize;
            out.set(q, Cost::new(own) + table.best(floor_q, budget_q));
        }
    }
    out
}

/// Belief of one variable node after the inner rounds.
#[derive(Debug, Clone)]
pub struct Belief {
    pub user: usize,
    pub subchannel: usize,
    pub message: Message,
}

/// One user's claim on a subchannel, sent to the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub user: usize,
    pub subchannel: usize,
    pub format: u8,
    /// Belief margin backing the claim, used for arbitration.
    pub margin: f64,
}

/// Message state of one outer cycle's factor graph.
pub struct InnerState {
    users: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    residual_rates: Vec<f64>,
    residual_caps: Vec<f64>,
    /// W→V messages (also the V→C forward), per user per edge.
    to_c: Vec<Vec<Message>>,
    /// C→V messages (also the V→W forward), initialized all-zero.
    to_w: Vec<Vec<Message>>,
    /// Per subchannel: the (local user, edge position) pairs attached to it.
    subchannel_edges: BTreeMap<usize, Vec<(usize, usize)>>,
}

impl InnerState {
    /// Builds the cycle graph. `users`, `candidates`, `residual_rates` and
    /// `residual_caps` are parallel; messages start at the all-zero
    /// initialization.
    pub fn new(
        instance: &ProblemInstance,
        users: Vec<usize>,
        candidates: Vec<Vec<usize>>,
        residual_rates: Vec<f64>,
        residual_caps: Vec<f64>,
    ) -> InnerState {
        let num_formats = instance.formats().num_formats();
        let mut subchannel_edges: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (lu, cands) in candidates.iter().enumerate() {
            for (pos, &f) in cands.iter().enumerate() {
                subchannel_edges.entry(f).or_default().push((lu, pos));
            }
        }
        let to_c = candidates
            .iter()
            .map(|c| vec![Message::zero(num_formats); c.len()])
            .collect();
        let to_w = candidates
            .iter()
            .map(|c| vec![Message::zero(num_formats); c.len()])
            .collect();
        InnerState {
            users,
            candidates,
            residual_rates,
            residual_caps,
            to_c,
            to_w,
            subchannel_edges,
        }
    }

    /// Entries differ beyond 1e-9 relative: the round is still moving.
    /// Damped blends keep drifting by ulps long after the decision content
    /// has settled, so the fixed-point exit uses a tolerance rather than
    /// bit equality.
    fn materially_different(new: &Message, old: &Message) -> bool {
        new.values().iter().zip(old.values()).any(|(a, b)| {
            if a.is_finite() != b.is_finite() {
                true
            } else if a.is_finite() {
                (a.raw() - b.raw()).abs() > 1e-9 * b.raw().abs().max(1.0)
            } else {
                false
            }
        })
    }

    fn post_process(message: &mut Message, previous: &Message, config: &MpConfig) {
        if config.normalization {
            message.normalize();
        }
        if config.damping > 0.0 {
            let lambda = config.damping;
            for q in 0..message.len() {
                let new = message.get(q);
                let old = previous.get(q);
                // Blend finite pairs only; fresh information wins when the
                // previous entry was infeasible, and a newly infeasible
                // entry stays infeasible.
                if new.is_finite() && old.is_finite() {
                    message.set(q, Cost::new((1.0 - lambda) * new.raw() + lambda * old.raw()));
                }
            }
        }
    }

    /// Floods `config.inner_iterations` rounds (stopping early at a message
    /// fixed point) and returns the per-edge beliefs `m^{WV} + m^{CV}`.
    ///
    /// Beliefs are taken per user from the last round in which any of that
    /// user's entries was still finite. On zero-slack demands, contention
    /// makes the extended-real messages collapse to all-infinite within a
    /// round or two (a contested subchannel's exclusivity feedback leaves
    /// no feasible completion); deciding from the last informative round
    /// (ultimately the user's first-round solo view) turns that collapse
    /// into ordinary claims for the base station to arbitrate. Users whose
    /// demand is infeasible even in the solo view keep all-infinite
    /// beliefs.
    pub fn run_inner_rounds(
        &mut self,
        instance: &ProblemInstance,
        config: &MpConfig,
        outer_cycle: usize,
        trace: &mut dyn TraceSink,
    ) -> Vec<Belief> {
        let mut decided: Vec<Option<Vec<Message>>> = vec![None; self.users.len()];
        let mut solo_view: Vec<Vec<Message>> = Vec::new();
        for round in 0..config.inner_iterations {
            let mut changed = false;

            // User-node half: every W update reads only to_w, written last
            // half-round, so updates within the half are order-independent.
            for lu in 0..self.users.len() {
                for pos in 0..self.candidates[lu].len() {
                    let mut msg = w_node_update(
                        instance,
                        self.users[lu],
                        &self.candidates[lu],
                        pos,
                        &self.to_w[lu],
                        self.residual_rates[lu],
                        self.residual_caps[lu],
                    );
                    Self::post_process(&mut msg, &self.to_c[lu][pos], config);
                    trace.on_message(&TraceEvent {
                        outer_cycle,
                        inner_round: round,
                        user: self.users[lu],
                        subchannel: self.candidates[lu][pos],
                        direction: MessageDirection::WNodeToVariable,
                        values: msg.values(),
                    });
                    if Self::materially_different(&msg, &self.to_c[lu][pos]) {
                        changed = true;
                    }
                    self.to_c[lu][pos] = msg;
                }
            }
            if round == 0 {
                // First-round user-node messages see the all-zero
                // initialization: each user's standalone optimum.
                solo_view = self.to_c.clone();
            }

            // Exclusivity-node half: subchannels partition the edges, so
            // each subchannel reads its own snapshot and writes its own
            // outputs.
            for (&subchannel, edges) in &self.subchannel_edges {
                let incoming: Vec<Message> =
                    edges.iter().map(|&(lu, pos)| self.to_c[lu][pos].clone()).collect();
                for (i, &(lu, pos)) in edges.iter().enumerate() {
                    let mut msg = c_node_update(&incoming, i);
                    Self::post_process(&mut msg, &self.to_w[lu][pos], config);
                    trace.on_message(&TraceEvent {
                        outer_cycle,
                        inner_round: round,
                        user: self.users[lu],
                        subchannel,
                        direction: MessageDirection::CNodeToVariable,
                        values: msg.values(),
                    });
                    if Self::materially_different(&msg, &self.to_w[lu][pos]) {
                        changed = true;
                    }
                    self.to_w[lu][pos] = msg;
                }
            }

            for (lu, slot) in decided.iter_mut().enumerate() {
                let combined: Vec<Message> = (0..self.candidates[lu].len())
                    .map(|pos| self.to_c[lu][pos].plus(&self.to_w[lu][pos]))
                    .collect();
                if combined.iter().any(|m| m.argmin().is_some()) {
                    *slot = Some(combined);
                }
            }

            if !changed {
                break;
            }
        }

        let mut beliefs = Vec::new();
        for lu in 0..self.users.len() {
            let per_edge = match decided[lu].take() {
                Some(combined) => combined,
                None => core::mem::take(&mut solo_view[lu]),
            };
            for (pos, message) in per_edge.into_iter().enumerate() {
                beliefs.push(Belief {
                    user: self.users[lu],
                    subchannel: self.candidates[lu][pos],
                    message,
                });
            }
        }
        beliefs
    }
}

/// Per-edge decisions: the belief argmin (ties toward the smaller format),
/// kept as a claim when it selects a nonzero format.
pub fn decide_and_peel(beliefs: &[Belief]) -> Vec<Claim> {
    let mut claims = Vec::new();
    for belief in beliefs {
        if let Some(q) = belief.message.argmin() {
            if q > 0 {
                claims.push(Claim {
                    user: belief.user,
                    subchannel: belief.subchannel,
                    format: q as u8,
                    margin: belief.message.margin(),
                });
            }
        }
    }
    claims
}

/// Base-station arbitration: a subchannel with a single claimant is
/// granted; contested subchannels go to the claim with the largest belief
/// margin, ties to the lower user index. Returns (granted, rejected), each
/// in ascending subchannel order.
pub fn bs_arbitrate(claims: &[Claim]) -> (Vec<Claim>, Vec<Claim>) {
    let mut by_subchannel: BTreeMap<usize, Vec<&Claim>> = BTreeMap::new();
    for claim in claims {
        by_subchannel.entry(claim.subchannel).or_default().push(claim);
    }
    let mut granted = Vec::new();
    let mut rejected = Vec::new();
    for (_, mut contenders) in by_subchannel {
        contenders.sort_by(|a, b| {
            b.margin
                .partial_cmp(&a.margin)
                .expect("margins are never NaN")
                .then(a.user.cmp(&b.user))
        });
        let mut it = contenders.into_iter();
        if let Some(winner) = it.next() {
            granted.push(winner.clone());
        }
        rejected.extend(it.cloned());
    }
    (granted, rejected)
}

/// Runs the full outer loop on `instance`. Deterministic: identical inputs
/// produce identical results. Outage is a result status, never an error.
pub fn run_mp(instance: &ProblemInstance, config: &MpConfig) -> MpResult {
    run_mp_traced(instance, config, &mut NoTrace)
}

/// [`run_mp`] with a trace sink receiving every per-round message.
pub fn run_mp_traced(
    instance: &ProblemInstance,
    config: &MpConfig,
    trace: &mut dyn TraceSink,
) -> MpResult {
    debug_assert!(config.validate().is_ok());
    let num_users = instance.num_users();
    let num_subchannels = instance.num_subchannels();
    let q_top = instance.formats().q_max();

    let mut residual_rate: Vec<f64> = (0..num_users).map(|u| instance.rate_demand(u)).collect();
    let mut residual_cap: Vec<f64> = (0..num_users).map(|u| instance.power_cap(u)).collect();
    let mut reserved = vec![false; num_subchannels];
    let mut allocation = Allocation::silent(num_users, num_subchannels);
    let mut status: Vec<Option<UserStatus>> = vec![None; num_users];
    for u in 0..num_users {
        if residual_rate[u] <= 0.0 {
            status[u] = Some(UserStatus::Fulfilled);
        }
    }

    let mut cycles_used = 0;
    for cycle in 0..config.max_outer_cycles {
        let pending: Vec<usize> = (0..num_users).filter(|&u| status[u].is_none()).collect();
        if pending.is_empty() {
            break;
        }
        cycles_used = cycle + 1;

        // Refresh candidate sets over the unreserved subchannels; a user
        // whose residual demand cannot fit its remaining candidates has no
        // feasible completion and is in outage.
        let mut active = Vec::new();
        let mut candidates = Vec::new();
        for &u in &pending {
            let cands = candidate_set(instance, u, config.candidate_size, &reserved);
            let top_rate = cands.len() as f64 * instance.rate_of_format(q_top);
            if cands.is_empty() || residual_rate[u] > top_rate {
                status[u] = Some(UserStatus::Outage);
            } else {
                active.push(u);
                candidates.push(cands);
            }
        }
        if active.is_empty() {
            continue;
        }

        let rates: Vec<f64> = active.iter().map(|&u| residual_rate[u]).collect();
        let caps: Vec<f64> = active.iter().map(|&u| residual_cap[u]).collect();
        let mut state = InnerState::new(instance, active.clone(), candidates, rates, caps);
        let beliefs = state.run_inner_rounds(instance, config, cycle, trace);

        // A user whose every belief is all-infinite has no feasible
        // completion under the current residuals.
        for &u in &active {
            let hopeless = beliefs
                .iter()
                .filter(|b| b.user == u)
                .all(|b| b.message.argmin().is_none());
            if hopeless {
                status[u] = Some(UserStatus::Outage);
            }
        }

        let claims = decide_and_peel(&beliefs);
        let claims: Vec<Claim> = claims
            .into_iter()
            .filter(|c| status[c.user].is_none())
            .collect();
        let (granted, _rejected) = bs_arbitrate(&claims);

        let mut any_progress = false;
        for claim in &granted {
            let power = instance.power_required(claim.user, claim.subchannel, claim.format as usize);
            // Independent per-edge argmins can jointly overshoot the cap on
            // cyclic graphs; such a grant would make the user infeasible,
            // so the station withholds it.
            if power > residual_cap[claim.user] {
                continue;
            }
            allocation.set(claim.user, claim.subchannel, claim.format);
            reserved[claim.subchannel] = true;
            residual_cap[claim.user] = (residual_cap[claim.user] - power).max(0.0);
            residual_rate[claim.user] = (residual_rate[claim.user]
                - instance.rate_of_format(claim.format as usize))
            .max(0.0);
            any_progress = true;
        }

        for &u in &active {
            if status[u].is_none() && residual_rate[u] <= 0.0 {
                status[u] = Some(UserStatus::Fulfilled);
            }
        }

        if !any_progress {
            // No reservation or residual changed, so every later cycle
            // would replay this one exactly; the undecided users stay
            // undecided forever.
            for &u in &active {
                if status[u].is_none() {
                    status[u] = Some(UserStatus::Outage);
                }
            }
        }
    }

    for s in &mut status {
        if s.is_none() {
            *s = Some(UserStatus::Outage);
        }
    }
    let status: Vec<UserStatus> = status.into_iter().map(|s| s.unwrap()).collect();
    let total_power = allocation.total_power(instance);
    MpResult { allocation, status, total_power, outer_cycles_used: cycles_used }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::FormatSet;
    use alloc::vec;

    fn instance(
        users: usize,
        chans: usize,
        gains: Vec<f64>,
        demands: Vec<f64>,
        caps: Vec<f64>,
        q: usize,
    ) -> ProblemInstance {
        ProblemInstance::new(
            users,
            chans,
            1.0,
            1.0,
            gains,
            demands,
            caps,
            FormatSet::new(q, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn msg(values: &[f64]) -> Message {
        Message::from_costs(values.iter().map(|&v| Cost::new(v)).collect())
    }

    #[test]
    fn normalize_shifts_to_zero_min() {
        let mut m = Message::from_costs(vec![Cost::new(3.0), Cost::new(5.0), Cost::INFINITE]);
        assert!(m.normalize());
        assert_eq!(m.get(0), Cost::ZERO);
        assert_eq!(m.get(1), Cost::new(2.0));
        assert!(m.get(2).is_infinite());
    }

    #[test]
    fn normalize_idempotent_and_flags_all_infinite() {
        let mut m = msg(&[0.0, 2.0, 7.0]);
        assert!(m.normalize());
        let snapshot = m.clone();
        assert!(m.normalize());
        assert_eq!(m, snapshot);

        let mut dead = Message::infinite(3);
        assert!(!dead.normalize());
        assert!(dead.values().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn argmin_ties_toward_smaller_format() {
        assert_eq!(msg(&[0.0, 0.0]).argmin(), Some(0));
        assert_eq!(msg(&[5.0, 1.0, 7.0]).argmin(), Some(1));
        assert_eq!(Message::infinite(3).argmin(), None);
    }

    #[test]
    fn margin_cases() {
        assert_eq!(msg(&[1.0, 4.0, 2.0]).margin(), 1.0);
        assert_eq!(Message::infinite(2).margin(), 0.0);
        let one_finite = Message::from_costs(vec![Cost::new(1.0), Cost::INFINITE]);
        assert!(one_finite.margin().is_infinite());
    }

    #[test]
    fn c_node_single_neighbor_is_all_zero() {
        let incoming = vec![msg(&[3.0, 1.0, 4.0])];
        let out = c_node_update(&incoming, 0);
        for q in 0..3 {
            assert_eq!(out.get(q), Cost::ZERO);
        }
    }

    #[test]
    fn c_node_all_zero_inputs_stay_zero() {
        let incoming = vec![Message::zero(3), Message::zero(3), Message::zero(3)];
        let out = c_node_update(&incoming, 1);
        for q in 0..3 {
            assert_eq!(out.get(q), Cost::ZERO);
        }
    }

    #[test]
    fn c_node_closed_form_hand_case() {
        // Two other users; q ≥ 1 forces both silent (cost 2+5=7), q = 0 may
        // let one of them speak: min(7, 5+1, 2+3) = 5.
        let incoming = vec![
            msg(&[2.0, 4.0, 1.0]),
            msg(&[9.0, 9.0, 9.0]), // target
            msg(&[5.0, 3.0, 8.0]),
        ];
        let out = c_node_update(&incoming, 1);
        assert_eq!(out.get(1), Cost::new(7.0));
        assert_eq!(out.get(2), Cost::new(7.0));
        assert_eq!(out.get(0), Cost::new(5.0));
    }

    #[test]
    fn c_node_handles_infinite_silence() {
        // One other user cannot be silent: every q ≥ 1 entry is infinite,
        // q = 0 picks that user's cheapest active format.
        let incoming = vec![
            Message::from_costs(vec![Cost::INFINITE, Cost::new(2.0), Cost::new(6.0)]),
            msg(&[0.0, 0.0, 0.0]), // target
        ];
        let out = c_node_update(&incoming, 1);
        assert!(out.get(1).is_infinite());
        assert!(out.get(2).is_infinite());
        assert_eq!(out.get(0), Cost::new(2.0));
    }

    #[test]
    fn w_node_no_demand() {
        // b_u = 0, all incoming zero: m(0) = 0 and m(q) = P_ν(q).
        let inst = instance(1, 2, vec![1.0, 1.0], vec![0.0], vec![f64::INFINITY], 2);
        let incoming = vec![Message::zero(3), Message::zero(3)];
        let out = w_node_update(&inst, 0, &[0, 1], 0, &incoming, 0.0, f64::INFINITY);
        assert_eq!(out.get(0), Cost::ZERO);
        assert_eq!(out.get(1), Cost::new(1.0));
        assert_eq!(out.get(2), Cost::new(3.0));
    }

    #[test]
    fn w_node_unreachable_rate_all_infinite() {
        let inst = instance(1, 2, vec![1.0, 1.0], vec![10.0], vec![f64::INFINITY], 2);
        let incoming = vec![Message::zero(3), Message::zero(3)];
        // Demand of 10 rate units against at most η_2·2 = 4.
        let out = w_node_update(&inst, 0, &[0, 1], 0, &incoming, 10.0, f64::INFINITY);
        assert!(out.values().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn w_node_respects_power_cap_on_target() {
        // P(0,0,q) = 2^q − 1; cap 2 forbids q = 2 on the target directly.
        let inst = instance(1, 2, vec![1.0, 1.0], vec![1.0], vec![2.0], 2);
        let incoming = vec![Message::zero(3), Message::zero(3)];
        let out = w_node_update(&inst, 0, &[0, 1], 0, &incoming, 1.0, 2.0);
        assert_eq!(out.get(1), Cost::new(1.0));
        assert!(out.get(2).is_infinite());
        // q = 0 forces the rate onto the other channel: cost 1.
        assert_eq!(out.get(0), Cost::new(1.0));
    }

    #[test]
    fn decide_and_peel_rules() {
        let beliefs = vec![
            Belief { user: 0, subchannel: 0, message: msg(&[5.0, 1.0, 7.0]) },
            Belief { user: 0, subchannel: 1, message: msg(&[0.0, 0.0, 9.0]) },
            Belief { user: 1, subchannel: 2, message: msg(&[0.5, 2.0, 3.0]) },
        ];
        let claims = decide_and_peel(&beliefs);
        assert_eq!(claims.len(), 1);
        assert_eq!(claims[0].user, 0);
        assert_eq!(claims[0].subchannel, 0);
        assert_eq!(claims[0].format, 1);
        assert_eq!(claims[0].margin, 4.0);
    }

    #[test]
    fn arbitrate_margin_then_user_index() {
        let claims = vec![
            Claim { user: 5, subchannel: 0, format: 1, margin: 3.0 },
            Claim { user: 2, subchannel: 0, format: 2, margin: 1.0 },
            Claim { user: 1, subchannel: 3, format: 1, margin: 0.5 },
        ];
        let (granted, rejected) = bs_arbitrate(&claims);
        assert_eq!(granted.len(), 2);
        assert_eq!(granted[0].user, 5);
        assert_eq!(granted[0].subchannel, 0);
        assert_eq!(granted[1].user, 1);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].user, 2);

        let tied = vec![
            Claim { user: 5, subchannel: 0, format: 1, margin: 2.0 },
            Claim { user: 2, subchannel: 0, format: 1, margin: 2.0 },
        ];
        let (granted, _) = bs_arbitrate(&tied);
        assert_eq!(granted[0].user, 2);
    }

    #[test]
    fn run_mp_zero_demand_is_immediately_fulfilled() {
        let inst = instance(2, 4, vec![1.0; 8], vec![0.0, 0.0], vec![f64::INFINITY; 2], 2);
        let config = MpConfig { candidate_size: 2, ..MpConfig::default() };
        let result = run_mp(&inst, &config);
        assert!(result.all_fulfilled());
        assert_eq!(result.total_power, 0.0);
        assert_eq!(result.outer_cycles_used, 0);
    }

    #[test]
    fn run_mp_single_user_matches_solo_dp() {
        let gains = vec![2.0, 0.5, 1.0, 4.0];
        let inst = instance(1, 4, gains, vec![3.0], vec![f64::INFINITY], 2);
        let config = MpConfig { candidate_size: 3, ..MpConfig::default() };
        let result = run_mp(&inst, &config);
        assert!(result.all_fulfilled());

        let cands = candidate_set(&inst, 0, 3, &[false; 4]);
        let (value, formats) =
            crate::dp::solve_user(&inst, 0, &cands, 3.0, f64::INFINITY, dp::DEFAULT_POWER_RESOLUTION);
        assert!(value.is_finite());
        assert_eq!(result.total_power, value.raw());
        for (pos, &f) in cands.iter().enumerate() {
            assert_eq!(result.allocation.get(0, f), formats[pos]);
        }
    }

    #[test]
    fn run_mp_is_deterministic() {
        let gains = vec![1.5, 0.7, 2.0, 0.4, 0.9, 1.1, 0.3, 2.4];
        let inst = instance(2, 4, gains, vec![2.0, 2.0], vec![f64::INFINITY; 2], 2);
        let config = MpConfig { candidate_size: 3, ..MpConfig::default() };
        let a = run_mp(&inst, &config);
        let b = run_mp(&inst, &config);
        assert_eq!(a, b);
    }

    #[test]
    fn run_mp_enforces_exclusivity() {
        let gains = vec![1.5, 0.7, 2.0, 0.4, 0.9, 1.1, 0.3, 2.4];
        let inst = instance(2, 4, gains, vec![2.0, 2.0], vec![f64::INFINITY; 2], 2);
        let config = MpConfig { candidate_size: 3, ..MpConfig::default() };
        let result = run_mp(&inst, &config);
        for f in 0..4 {
            let active = (0..2).filter(|&n| result.allocation.get(n, f) > 0).count();
            assert!(active <= 1);
        }
    }

    #[test]
    fn run_mp_declares_outage_when_demand_unreachable() {
        // One channel, demand beyond η_Q·1.
        let inst = instance(1, 1, vec![1.0], vec![5.0], vec![f64::INFINITY], 2);
        let config = MpConfig { candidate_size: 1, ..MpConfig::default() };
        let result = run_mp(&inst, &config);
        assert_eq!(result.status, vec![UserStatus::Outage]);
    }
}
