//! Exact solver for the restricted single-user problem.
//!
//! Given a set of eligible subchannels with one extended-real cost per
//! (subchannel, format) pair, find the format vector that minimizes the
//! total cost subject to a rate floor (the format indices must sum to at
//! least `d_min`) and a power budget. This is a multiple-choice knapsack
//! variant; it is solved by a pseudopolynomial dynamic program once the
//! per-channel powers are quantized to integer units.
//!
//! The table is filled over channel *suffixes* with an "at least d" rate
//! coordinate: `value(p, d, k)` is the cheapest completion on channels
//! `p..P` whose formats sum to at least `d` within power `k`. This computes
//! the same optimum as a prefix table with exact rate rows minimized over
//! `j ≥ d_min`, needs only `d_min + 1` rate rows, and lets solution
//! recovery walk channels first-to-last so ties always resolve to the
//! lexicographically smallest optimal vector (the same rule the brute-force
//! oracle uses).

use alloc::vec;
use alloc::vec::Vec;

use crate::cost::Cost;

/// Default number of integer units the power budget is split into when a
/// problem arrives with non-integral powers.
pub const DEFAULT_POWER_RESOLUTION: u64 = 1000;

/// Snap a value to the nearest integer when it is within 1e-9 (relative),
/// shielding exactly-representable products from float dust.
fn snap(v: f64) -> f64 {
    let r = libm::round(v);
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r
    } else {
        v
    }
}

/// Conservative upward rounding: exact integers stay put, everything else
/// rounds up.
pub(crate) fn snap_ceil(v: f64) -> f64 {
    libm::ceil(snap(v))
}

/// Conservative downward rounding: exact integers stay put, everything else
/// rounds down.
pub(crate) fn snap_floor(v: f64) -> f64 {
    libm::floor(snap(v))
}

/// `Some(rounded)` when `v` is an integer up to 1e-9 relative tolerance.
fn as_integral(v: f64) -> Option<f64> {
    let r = libm::round(v);
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        Some(r)
    } else {
        None
    }
}

/// Rate floor in format units for a residual rate demand: the smallest
/// integer `d` with `d·unit_rate ≥ residual`. Zero when the residual is
/// already covered.
pub fn rate_floor_units(residual_rate: f64, unit_rate: f64) -> usize {
    if residual_rate <= 0.0 {
        return 0;
    }
    let units = snap_ceil(residual_rate / unit_rate);
    if units <= 0.0 {
        0
    } else {
        units as usize
    }
}

/// Quantizes real powers against a real budget: the budget maps to exactly
/// `resolution` integer units (rounded down), item powers round up. The
/// rounding directions guarantee that any format vector accepted in units
/// also satisfies the real-valued budget.
pub fn quantize_powers(powers: &[f64], budget: f64, resolution: u64) -> (Vec<u64>, u64) {
    debug_assert!(resolution >= 1);
    debug_assert!(budget.is_finite() && budget >= 0.0);
    if budget <= 0.0 {
        // Nothing fits a zero budget except zero-power items.
        let units = powers.iter().map(|&p| u64::from(p > 0.0)).collect();
        return (units, 0);
    }
    let scale = resolution as f64 / budget;
    let units = powers
        .iter()
        .map(|&p| {
            let u = snap_ceil(p * scale);
            if u >= u64::MAX as f64 {
                u64::MAX
            } else {
                u as u64
            }
        })
        .collect();
    (units, resolution)
}

/// The restricted single-user problem with real-valued data, as handed to
/// the solver and to the brute-force oracle: per-channel per-format costs,
/// real powers, an integer rate floor and a real power budget (`+∞` when
/// the cap is relaxed).
#[derive(Debug, Clone)]
pub struct SingleUserProblem {
    /// `num_channels × num_formats`, row-major; `costs[f][0]` carries the
    /// zero-power entry (the incoming message at format 0).
    pub costs: Vec<Cost>,
    /// Real powers, same layout; column 0 is all zeros.
    pub powers: Vec<f64>,
    pub num_channels: usize,
    pub num_formats: usize,
    /// Minimum format-index sum `d_min`.
    pub rate_floor: usize,
    /// Real power budget; `f64::INFINITY` drops the power dimension.
    pub power_budget: f64,
}

impl SingleUserProblem {
    #[inline]
    pub fn cost(&self, channel: usize, format: usize) -> Cost {
        self.costs[channel * self.num_formats + format]
    }

    #[inline]
    pub fn power(&self, channel: usize, format: usize) -> f64 {
        self.powers[channel * self.num_formats + format]
    }

    /// Highest reachable format-index sum.
    #[inline]
    pub fn max_rate_units(&self) -> usize {
        (self.num_formats - 1) * self.num_channels
    }
}

/// The same problem with integer powers and an integer budget, ready for
/// the budgeted dynamic program.
#[derive(Debug, Clone)]
pub struct RestrictedProblem {
    pub costs: Vec<Cost>,
    /// Integer power units, `num_channels × num_formats` row-major.
    pub power_units: Vec<u64>,
    pub num_channels: usize,
    pub num_formats: usize,
    pub rate_floor: usize,
    /// Integer budget in the same units.
    pub budget_units: u64,
    /// Units per real power unit; converts real powers via `p · power_scale`.
    pub power_scale: f64,
}

impl RestrictedProblem {
    /// Builds the integer problem from real data. Powers and budget that are
    /// already integers (and fit the resolution) are taken verbatim, so
    /// integral instances are solved exactly; otherwise [`quantize_powers`]
    /// applies with its conservative rounding.
    pub fn from_real(problem: &SingleUserProblem, resolution: u64) -> RestrictedProblem {
        debug_assert!(problem.power_budget.is_finite());
        let budget = problem.power_budget.max(0.0);
        let integral_budget =
            as_integral(budget).filter(|&b| b <= resolution as f64 && b >= 0.0);
        let integral_powers: Option<Vec<u64>> = problem
            .powers
            .iter()
            .map(|&p| {
                as_integral(p)
                    .filter(|&r| r >= 0.0 && r < u64::MAX as f64)
                    .map(|r| r as u64)
            })
            .collect();
        let (power_units, budget_units, power_scale) =
            if let (Some(b), Some(units)) = (integral_budget, integral_powers) {
                (units, b as u64, 1.0)
            } else {
                let (units, budget_units) = quantize_powers(&problem.powers, budget, resolution);
                let scale = if budget > 0.0 { resolution as f64 / budget } else { 1.0 };
                (units, budget_units, scale)
            };
        // Any item heavier than the whole budget can never be packed; clamp
        // so table indices stay small.
        let clamp = budget_units.saturating_add(1);
        let power_units = power_units.into_iter().map(|u| u.min(clamp)).collect();
        RestrictedProblem {
            costs: problem.costs.clone(),
            power_units,
            num_channels: problem.num_channels,
            num_formats: problem.num_formats,
            rate_floor: problem.rate_floor,
            budget_units,
            power_scale,
        }
    }

    #[inline]
    pub fn cost(&self, channel: usize, format: usize) -> Cost {
        self.costs[channel * self.num_formats + format]
    }

    #[inline]
    pub fn units(&self, channel: usize, format: usize) -> u64 {
        self.power_units[channel * self.num_formats + format]
    }

    #[inline]
    pub fn max_rate_units(&self) -> usize {
        (self.num_formats - 1) * self.num_channels
    }
}

/// Value table of the dynamic program.
///
/// `suffix_value(p, d, k)` is the optimal cost over channels `p..P`
/// (0-based; `p = P` is the empty suffix) with format-index sum at least
/// `d` and power at most `k` units. The relaxed variant has a single
/// power column.
#[derive(Debug, Clone)]
pub struct DpTable {
    values: Vec<Cost>,
    num_channels: usize,
    rate_rows: usize,
    budget_cols: usize,
}

impl DpTable {
    #[inline]
    fn idx(&self, p: usize, d: usize, k: usize) -> usize {
        (p * self.rate_rows + d) * self.budget_cols + k
    }

    #[inline]
    pub fn suffix_value(&self, p: usize, d: usize, k: usize) -> Cost {
        self.values[self.idx(p, d, k.min(self.budget_cols - 1))]
    }

    #[inline]
    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    #[inline]
    pub fn rate_rows(&self) -> usize {
        self.rate_rows
    }

    #[inline]
    pub fn budget_cols(&self) -> usize {
        self.budget_cols
    }

    /// Fills the budgeted table for `problem`, with rate rows `0..=rate_floor`.
    pub fn fill(problem: &RestrictedProblem) -> DpTable {
        let rate_rows = problem.rate_floor + 1;
        let budget_cols = problem.budget_units as usize + 1;
        let mut table = DpTable {
            values: vec![Cost::INFINITE; (problem.num_channels + 1) * rate_rows * budget_cols],
            num_channels: problem.num_channels,
            rate_rows,
            budget_cols,
        };
        // Empty suffix: zero cost when nothing more is demanded.
        for k in 0..budget_cols {
            let i = table.idx(problem.num_channels, 0, k);
            table.values[i] = Cost::ZERO;
        }
        for p in (0..problem.num_channels).rev() {
            for d in 0..rate_rows {
                for k in 0..budget_cols {
                    let mut best = Cost::INFINITE;
                    for h in 0..problem.num_formats {
                        let u = problem.units(p, h) as usize;
                        if u > k {
                            continue;
                        }
                        let rest = table.values[table.idx(p + 1, d.saturating_sub(h), k - u)];
                        best = best.min(problem.cost(p, h) + rest);
                    }
                    let i = table.idx(p, d, k);
                    table.values[i] = best;
                }
            }
        }
        table
    }

    /// Fills the power-relaxed table (budget dropped), rows `0..=rate_floor`.
    pub fn fill_relaxed(problem: &SingleUserProblem) -> DpTable {
        let rate_rows = problem.rate_floor + 1;
        let mut table = DpTable {
            values: vec![Cost::INFINITE; (problem.num_channels + 1) * rate_rows],
            num_channels: problem.num_channels,
            rate_rows,
            budget_cols: 1,
        };
        let i = table.idx(problem.num_channels, 0, 0);
        table.values[i] = Cost::ZERO;
        for p in (0..problem.num_channels).rev() {
            for d in 0..rate_rows {
                let mut best = Cost::INFINITE;
                for h in 0..problem.num_formats {
                    let rest = table.values[table.idx(p + 1, d.saturating_sub(h), 0)];
                    best = best.min(problem.cost(p, h) + rest);
                }
                let i = table.idx(p, d, 0);
                table.values[i] = best;
            }
        }
        table
    }

    /// Optimal value with format sum ≥ `rate_floor` within `budget_units`.
    #[inline]
    pub fn best(&self, rate_floor: usize, budget_units: usize) -> Cost {
        debug_assert!(rate_floor < self.rate_rows);
        self.suffix_value(0, rate_floor, budget_units)
    }

    /// Re-derives one argmin format vector by replaying the transitions,
    /// choosing the smallest format at every channel so ties resolve to the
    /// lexicographically smallest optimal vector. Empty when infeasible.
    fn recover<C, U>(&self, cost: C, units: U, num_formats: usize, rate_floor: usize, budget: usize) -> Vec<u8>
    where
        C: Fn(usize, usize) -> Cost,
        U: Fn(usize, usize) -> usize,
    {
        let mut formats = Vec::with_capacity(self.num_channels);
        let mut d = rate_floor;
        let mut k = budget.min(self.budget_cols - 1);
        for p in 0..self.num_channels {
            let target = self.suffix_value(p, d, k);
            let mut chosen = None;
            for h in 0..num_formats {
                let u = units(p, h);
                if u > k {
                    continue;
                }
                let rest = self.suffix_value(p + 1, d.saturating_sub(h), k - u);
                if cost(p, h) + rest == target {
                    chosen = Some((h, u));
                    break;
                }
            }
            let (h, u) = chosen.expect("filled table always replays");
            formats.push(h as u8);
            d = d.saturating_sub(h);
            k -= u;
        }
        formats
    }
}

/// Solves the integer restricted problem exactly: optimal value plus the
/// lexicographically smallest achieving format vector, `(+∞, [])` when
/// infeasible. The returned value is re-accumulated channel-by-channel from
/// the recovered vector so it is bit-identical to a direct evaluation of
/// that vector.
pub fn dp_solve(problem: &RestrictedProblem) -> (Cost, Vec<u8>) {
    if problem.rate_floor > problem.max_rate_units() {
        return (Cost::INFINITE, Vec::new());
    }
    let table = DpTable::fill(problem);
    let best = table.best(problem.rate_floor, problem.budget_units as usize);
    if best.is_infinite() {
        return (Cost::INFINITE, Vec::new());
    }
    let formats = table.recover(
        |p, h| problem.cost(p, h),
        |p, h| problem.units(p, h) as usize,
        problem.num_formats,
        problem.rate_floor,
        problem.budget_units as usize,
    );
    let value = formats
        .iter()
        .enumerate()
        .fold(Cost::ZERO, |acc, (p, &h)| acc + problem.cost(p, h as usize));
    (value, formats)
}

/// Power-relaxed variant: identical contract with the budget dimension
/// dropped, running in O(P·d_min·Q) table cells.
pub fn dp_solve_relaxed(problem: &SingleUserProblem) -> (Cost, Vec<u8>) {
    if problem.rate_floor > problem.max_rate_units() {
        return (Cost::INFINITE, Vec::new());
    }
    let table = DpTable::fill_relaxed(problem);
    let best = table.best(problem.rate_floor, 0);
    if best.is_infinite() {
        return (Cost::INFINITE, Vec::new());
    }
    let formats = table.recover(
        |p, h| problem.cost(p, h),
        |_, _| 0,
        problem.num_formats,
        problem.rate_floor,
        0,
    );
    let value = formats
        .iter()
        .enumerate()
        .fold(Cost::ZERO, |acc, (p, &h)| acc + problem.cost(p, h as usize));
    (value, formats)
}

/// Solves a real-valued problem end to end: relaxed when the budget is
/// infinite, otherwise quantized at `resolution` and solved exactly on the
/// integer data.
pub fn solve_real(problem: &SingleUserProblem, resolution: u64) -> (Cost, Vec<u8>) {
    if problem.power_budget.is_infinite() {
        dp_solve_relaxed(problem)
    } else {
        dp_solve(&RestrictedProblem::from_real(problem, resolution))
    }
}

/// Convenience: the solo optimum of one user over a channel set with zero
/// incoming messages (costs are pure powers), e.g. for tree-exactness
/// checks and single-user runs.
pub fn solve_user(
    instance: &crate::problem::ProblemInstance,
    user: usize,
    channels: &[usize],
    residual_rate: f64,
    power_cap: f64,
    resolution: u64,
) -> (Cost, Vec<u8>) {
    let num_formats = instance.formats().num_formats();
    let mut costs = Vec::with_capacity(channels.len() * num_formats);
    let mut powers = Vec::with_capacity(channels.len() * num_formats);
    for &f in channels {
        for h in 0..num_formats {
            let p = instance.power_required(user, f, h);
            costs.push(Cost::new(p));
            powers.push(p);
        }
    }
    let unit_rate = instance.subchannel_bandwidth() * instance.formats().eta_step();
    let problem = SingleUserProblem {
        costs,
        powers,
        num_channels: channels.len(),
        num_formats,
        rate_floor: rate_floor_units(residual_rate, unit_rate),
        power_budget: power_cap,
    };
    solve_real(&problem, resolution)
}
