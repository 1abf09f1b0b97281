//! Centralized comparison schemes.
//!
//! [`brcg_allocate`] reconstructs the classic three-phase heuristic:
//! bandwidth assignment from rate demands and average gains (BABS), greedy
//! subchannel placement (rate-craving greedy), then single-user bit
//! loading. [`fixed_format_assign`] is the fixed-format benchmark: every
//! user gets exactly `F/N` subchannels at one common format, placed by an
//! exact minimum-cost assignment.
//!
//! Neither scheme considers power caps while optimizing; outage is flagged
//! post hoc when a user's power exceeds its cap (or its rate cannot be
//! served at all). Phase-internal orderings below are implementation
//! choices held fixed across experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::min_cost_assignment;
use crate::problem::{Allocation, ProblemInstance};
use crate::{Error, Result};

/// Allocation plus per-user power and outage flags.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub allocation: Allocation,
    pub per_user_power: Vec<f64>,
    /// True when the user's rate could not be served or its transmitted
    /// power exceeds the cap.
    pub outage: Vec<bool>,
}

impl BaselineResult {
    pub fn any_outage(&self) -> bool {
        self.outage.iter().any(|&o| o)
    }

    pub fn total_power(&self) -> f64 {
        self.per_user_power.iter().sum()
    }
}

/// Estimated power for serving `demand` on `m` equal-rate subchannels at
/// the user's average gain; the BABS figure of merit.
fn estimated_power(instance: &ProblemInstance, avg_gain: f64, demand: f64, m: usize) -> f64 {
    if demand <= 0.0 {
        return 0.0;
    }
    if m == 0 {
        return f64::INFINITY;
    }
    let b = instance.subchannel_bandwidth();
    let per_channel_eta = demand / (m as f64 * b);
    m as f64 * (libm::exp2(per_channel_eta) - 1.0) * instance.noise_power() / avg_gain
}

/// Bandwidth assignment: how many subchannels each user gets.
fn babs(instance: &ProblemInstance, avg_gain: &[f64]) -> Vec<usize> {
    let n = instance.num_users();
    let f = instance.num_subchannels();
    let q_top = instance.formats().q_max();
    let top_rate = instance.rate_of_format(q_top);

    // Minimum counts at the highest format.
    let mut counts: Vec<usize> = (0..n)
        .map(|u| {
            let demand = instance.rate_demand(u);
            if demand <= 0.0 {
                0
            } else {
                crate::dp::rate_floor_units(demand, top_rate).max(1)
            }
        })
        .collect();

    let total: usize = counts.iter().sum();
    if total > f {
        // Proportional trim by largest remainder; demand that no longer
        // fits will surface as outage at bit loading.
        let mut trimmed: Vec<usize> =
            counts.iter().map(|&m| m * f / total).collect();
        let mut leftover = f - trimmed.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ra = counts[a] * f % total;
            let rb = counts[b] * f % total;
            rb.cmp(&ra).then(a.cmp(&b))
        });
        for &u in &order {
            if leftover == 0 {
                break;
            }
            if counts[u] > trimmed[u] {
                trimmed[u] += 1;
                leftover -= 1;
            }
        }
        return trimmed;
    }

    // Greedy growth: hand the next subchannel to the user with the largest
    // estimated power reduction.
    let mut remaining = f - total;
    while remaining > 0 {
        let mut best: Option<(usize, f64)> = None;
        for u in 0..n {
            if instance.rate_demand(u) <= 0.0 {
                continue;
            }
            let now = estimated_power(instance, avg_gain[u], instance.rate_demand(u), counts[u]);
            let grown = estimated_power(instance, avg_gain[u], instance.rate_demand(u), counts[u] + 1);
            let delta = now - grown;
            if delta > 0.0 && best.is_none_or(|(_, d)| delta > d) {
                best = Some((u, delta));
            }
        }
        match best {
            Some((u, _)) => {
                counts[u] += 1;
                remaining -= 1;
            }
            None => break,
        }
    }
    counts
}

/// Rate-craving greedy placement: users pick their best free subchannel in
/// round-robin order of descending estimated power need, then contested
/// picks are settled by swaps that strictly reduce the total inverse gain.
fn rcg(instance: &ProblemInstance, avg_gain: &[f64], counts: &[usize]) -> Vec<Vec<usize>> {
    let n = instance.num_users();
    let f = instance.num_subchannels();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ea = estimated_power(instance, avg_gain[a], instance.rate_demand(a), counts[a]);
        let eb = estimated_power(instance, avg_gain[b], instance.rate_demand(b), counts[b]);
        eb.partial_cmp(&ea).expect("estimates are never NaN").then(a.cmp(&b))
    });

    let mut taken = vec![false; f];
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut left: Vec<usize> = counts.to_vec();
    while left.iter().any(|&m| m > 0) {
        for &u in &order {
            if left[u] == 0 {
                continue;
            }
            let pick = (0..f)
                .filter(|&ch| !taken[ch])
                .max_by(|&a, &b| {
                    instance
                        .gain(u, a)
                        .partial_cmp(&instance.gain(u, b))
                        .expect("gains are finite")
                        .then(b.cmp(&a))
                });
            if let Some(ch) = pick {
                taken[ch] = true;
                assigned[u].push(ch);
                left[u] -= 1;
            } else {
                left[u] = 0;
            }
        }
    }

    // Reallocation sweep: trade channels pairwise while it strictly lowers
    // the total inverse gain.
    for _ in 0..f * f {
        let mut best: Option<(usize, usize, usize, usize, f64)> = None;
        for a in 0..n {
            for b in (a + 1)..n {
                for (ia, &ca) in assigned[a].iter().enumerate() {
                    for (ib, &cb) in assigned[b].iter().enumerate() {
                        let now = 1.0 / instance.gain(a, ca) + 1.0 / instance.gain(b, cb);
                        let swapped = 1.0 / instance.gain(a, cb) + 1.0 / instance.gain(b, ca);
                        let improvement = now - swapped;
                        if improvement > 1e-12
                            && best.is_none_or(|(.., bi)| improvement > bi)
                        {
                            best = Some((a, ia, b, ib, improvement));
                        }
                    }
                }
            }
        }
        match best {
            Some((a, ia, b, ib, _)) => {
                let ca = assigned[a][ia];
                let cb = assigned[b][ib];
                assigned[a][ia] = cb;
                assigned[b][ib] = ca;
            }
            None => break,
        }
    }

    for set in &mut assigned {
        set.sort_unstable();
    }
    assigned
}

/// Single-user bit loading: raise one format step at a time on the channel
/// with the smallest power increment until the rate demand is covered.
/// Returns None when the formats are exhausted first.
fn bit_load(instance: &ProblemInstance, user: usize, channels: &[usize]) -> Option<Vec<u8>> {
    let q_top = instance.formats().q_max() as u8;
    let mut formats = vec![0u8; channels.len()];
    let mut rate = 0.0;
    let demand = instance.rate_demand(user);
    while rate < demand {
        let mut best: Option<(usize, f64)> = None;
        for (i, &ch) in channels.iter().enumerate() {
            if formats[i] >= q_top {
                continue;
            }
            let q = formats[i] as usize;
            let step = instance.power_required(user, ch, q + 1)
                - instance.power_required(user, ch, q);
            if best.is_none_or(|(_, s)| step < s) {
                best = Some((i, step));
            }
        }
        match best {
            Some((i, _)) => {
                formats[i] += 1;
                rate += instance.rate_of_format(1);
            }
            None => return None,
        }
    }
    Some(formats)
}

/// The BABS + RCG + bit-loading heuristic.
pub fn brcg_allocate(instance: &ProblemInstance) -> BaselineResult {
    let n = instance.num_users();
    let f = instance.num_subchannels();
    let avg_gain: Vec<f64> = (0..n)
        .map(|u| (0..f).map(|ch| instance.gain(u, ch)).sum::<f64>() / f as f64)
        .collect();

    let counts = babs(instance, &avg_gain);
    let assigned = rcg(instance, &avg_gain, &counts);

    let mut allocation = Allocation::silent(n, f);
    let mut per_user_power = vec![0.0; n];
    let mut outage = vec![false; n];
    for u in 0..n {
        let demand = instance.rate_demand(u);
        if demand > 0.0 && assigned[u].is_empty() {
            outage[u] = true;
            continue;
        }
        match bit_load(instance, u, &assigned[u]) {
            Some(formats) => {
                let mut power = 0.0;
                for (i, &ch) in assigned[u].iter().enumerate() {
                    allocation.set(u, ch, formats[i]);
                    power += instance.power_required(u, ch, formats[i] as usize);
                }
                per_user_power[u] = power;
                if power > instance.power_cap(u) {
                    outage[u] = true;
                }
            }
            None => outage[u] = true,
        }
    }
    BaselineResult { allocation, per_user_power, outage }
}

/// Fixed-format benchmark: exactly `F/N` subchannels per user, all at the
/// format whose efficiency is `eta_avg`, placed by an exact minimum-cost
/// assignment (slot-expanded square matrix, so integrality is immediate).
pub fn fixed_format_assign(instance: &ProblemInstance, eta_avg: f64) -> Result<BaselineResult> {
    let n = instance.num_users();
    let f = instance.num_subchannels();
    if !f.is_multiple_of(n) {
        return Err(Error::InvalidConfig(format!(
            "{n} users do not evenly divide {f} subchannels"
        )));
    }
    let q_fixed = instance
        .formats()
        .format_for_efficiency(eta_avg)
        .filter(|&q| q >= 1)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("no nonzero format with efficiency {eta_avg}"))
        })?;

    let slots_per_user = f / n;
    let assignment = min_cost_assignment(f, |slot, ch| {
        instance.power_required(slot / slots_per_user, ch, q_fixed)
    });

    let mut allocation = Allocation::silent(n, f);
    let mut per_user_power = vec![0.0; n];
    for (slot, &ch) in assignment.iter().enumerate() {
        let user = slot / slots_per_user;
        allocation.set(user, ch, q_fixed as u8);
        per_user_power[user] += instance.power_required(user, ch, q_fixed);
    }
    let slot_rate = slots_per_user as f64 * instance.rate_of_format(q_fixed);
    let outage = (0..n)
        .map(|u| {
            per_user_power[u] > instance.power_cap(u) || slot_rate < instance.rate_demand(u)
        })
        .collect();
    Ok(BaselineResult { allocation, per_user_power, outage })
}
