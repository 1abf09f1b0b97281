//! Brute-force reference solvers.
//!
//! Everything here enumerates raw search spaces and is meant for tests and
//! validation only; guards refuse inputs that would blow up. All results
//! are pure functions of their inputs with lexicographic tie-breaking, so
//! they are deterministic and directly comparable against the production
//! solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::cost::Cost;
use crate::dp::SingleUserProblem;
use crate::mp::Message;
use crate::problem::{global_cost, Allocation, CandidateSets, ProblemInstance};
use crate::{Error, Result};

const GLOBAL_GUARD: u128 = 10_000_000;
const SINGLE_USER_GUARD: u128 = 1_000_000;

fn check_guard(states: u128, guard: u128) -> Result<()> {
    if states > guard {
        Err(Error::SearchSpaceExceeded { size: states, guard })
    } else {
        Ok(())
    }
}

/// Mixed-radix counter over `slots` digits in base `base`; calls `visit`
/// for every combination in lexicographic order (last digit fastest... the
/// first slot is the most significant digit, so earlier slots change last).
fn for_each_combination<Fv: FnMut(&[u8])>(slots: usize, base: usize, mut visit: Fv) {
    let mut digits = vec![0u8; slots];
    loop {
        visit(&digits);
        // Increment from the last digit so enumeration is lexicographic
        // ascending over the vector read left to right.
        let mut i = slots;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if (digits[i] as usize) + 1 < base {
                digits[i] += 1;
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Exhaustive global optimum over all allocations restricted to the
/// candidate sets: minimum finite [`global_cost`] and the lexicographically
/// smallest argmin (slots ordered user-major, candidate-position within
/// user). `(+∞, silent)` when nothing is feasible.
pub fn brute_force_global(
    instance: &ProblemInstance,
    candidates: &CandidateSets,
) -> Result<(Cost, Allocation)> {
    let slots: Vec<(usize, usize)> = (0..instance.num_users())
        .flat_map(|n| candidates.user(n).iter().map(move |&f| (n, f)))
        .collect();
    let base = instance.formats().num_formats() as u128;
    let states = base
        .checked_pow(slots.len() as u32)
        .ok_or(Error::SearchSpaceExceeded { size: u128::MAX, guard: GLOBAL_GUARD })?;
    check_guard(states, GLOBAL_GUARD)?;

    let mut best = Cost::INFINITE;
    let mut best_alloc = Allocation::silent(instance.num_users(), instance.num_subchannels());
    for_each_combination(slots.len(), base as usize, |digits| {
        let mut alloc = Allocation::silent(instance.num_users(), instance.num_subchannels());
        for (&(n, f), &q) in slots.iter().zip(digits) {
            alloc.set(n, f, q);
        }
        let cost = global_cost(instance, candidates, &alloc);
        if cost.is_finite() && cost.raw() < best.raw() {
            best = cost;
            best_alloc = alloc;
        }
    });
    Ok((best, best_alloc))
}

/// Exhaustive optimum of the restricted single-user problem against the
/// real-valued (unquantized) constraints: minimum cost over all format
/// vectors with index sum ≥ `rate_floor` and real power sum within the
/// budget. Ties resolve to the lexicographically smallest vector. Returns
/// `(+∞, [])` when infeasible.
pub fn brute_force_single_user(problem: &SingleUserProblem) -> Result<(Cost, Vec<u8>)> {
    let base = problem.num_formats as u128;
    let states = base
        .checked_pow(problem.num_channels as u32)
        .ok_or(Error::SearchSpaceExceeded { size: u128::MAX, guard: SINGLE_USER_GUARD })?;
    check_guard(states, SINGLE_USER_GUARD)?;

    let mut best = Cost::INFINITE;
    let mut best_formats = Vec::new();
    for_each_combination(problem.num_channels, problem.num_formats, |digits| {
        let mut rate = 0usize;
        let mut power = 0.0f64;
        let mut cost = Cost::ZERO;
        for (f, &h) in digits.iter().enumerate() {
            rate += h as usize;
            power += problem.power(f, h as usize);
            cost += problem.cost(f, h as usize);
        }
        if rate >= problem.rate_floor && power <= problem.power_budget && cost.raw() < best.raw() {
            best = cost;
            best_formats = digits.to_vec();
        }
    });
    if best.is_infinite() {
        best_formats.clear();
    }
    Ok((best, best_formats))
}

/// Direct enumeration of the exclusivity-node message: for each format `q`
/// of the target edge, minimize the sum of the other users' incoming
/// message entries subject to at most one active transmitter overall.
pub fn brute_force_c_message(incoming: &[Message], target: usize) -> Result<Message> {
    let num_formats = incoming[target].len();
    let others: Vec<&Message> = incoming
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .map(|(_, m)| m)
        .collect();
    let states = (num_formats as u128)
        .checked_pow(others.len() as u32)
        .ok_or(Error::SearchSpaceExceeded { size: u128::MAX, guard: SINGLE_USER_GUARD })?;
    check_guard(states, SINGLE_USER_GUARD)?;

    let mut out = Message::infinite(num_formats);
    for q in 0..num_formats {
        let mut best = Cost::INFINITE;
        for_each_combination(others.len(), num_formats, |digits| {
            let active = digits.iter().filter(|&&h| h > 0).count() + usize::from(q > 0);
            if active > 1 {
                return;
            }
            let sum = digits
                .iter()
                .enumerate()
                .fold(Cost::ZERO, |acc, (i, &h)| acc + others[i].get(h as usize));
            best = best.min(sum);
        });
        out.set(q, best);
    }
    Ok(out)
}

/// Direct enumeration of the user-node message under the incoming-edge
/// exclusion reading: entry `q` is `P_{u,ν}(q)` plus the cheapest
/// completion on the other candidate channels (powers plus their incoming
/// messages) that serves the residual rate within the residual power cap.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_w_message(
    instance: &ProblemInstance,
    user: usize,
    candidates: &[usize],
    target_pos: usize,
    incoming: &[Message],
    residual_rate: f64,
    power_cap: f64,
) -> Result<Message> {
    let num_formats = instance.formats().num_formats();
    let nu = candidates[target_pos];
    let others: Vec<usize> = (0..candidates.len()).filter(|&i| i != target_pos).collect();
    let states = (num_formats as u128)
        .checked_pow(others.len() as u32)
        .ok_or(Error::SearchSpaceExceeded { size: u128::MAX, guard: SINGLE_USER_GUARD })?;
    check_guard(states, SINGLE_USER_GUARD)?;

    let mut out = Message::infinite(num_formats);
    for q in 0..num_formats {
        let base_power = instance.power_required(user, nu, q);
        let base_rate = instance.rate_of_format(q);
        if base_power > power_cap {
            continue;
        }
        let mut best = Cost::INFINITE;
        for_each_combination(others.len(), num_formats, |digits| {
            let mut rate = base_rate;
            let mut power = 0.0f64;
            let mut cost = Cost::ZERO;
            for (slot, &h) in others.iter().zip(digits) {
                let f = candidates[*slot];
                let h = h as usize;
                let p = instance.power_required(user, f, h);
                rate += instance.rate_of_format(h);
                power += p;
                cost += Cost::new(p) + incoming[*slot].get(h);
            }
            if rate >= residual_rate && power + base_power <= power_cap {
                best = best.min(cost);
            }
        });
        out.set(q, Cost::new(base_power) + best);
    }
    Ok(out)
}
