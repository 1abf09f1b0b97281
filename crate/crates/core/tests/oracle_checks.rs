//! Randomized equivalence checks against the brute-force oracles.
//!
//! Test values are drawn on grids that are exact in f64 (integer powers,
//! dyadic message entries), so sums are associative and "equal" means
//! bit-equal; the full-size runs live in the acceptance suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ramp_core::cost::Cost;
use ramp_core::dp::{self, dp_solve, RestrictedProblem, SingleUserProblem};
use ramp_core::format::FormatSet;
use ramp_core::mp::{self, Message, MpConfig};
use ramp_core::oracle;
use ramp_core::problem::{candidate_set, CandidateSets, ProblemInstance};

/// Dyadic cost in [0, 16] (multiples of 1/64) or +∞ with probability `p_inf`.
fn dyadic_cost(rng: &mut ChaCha8Rng, p_inf: f64) -> Cost {
    if rng.random::<f64>() < p_inf {
        Cost::INFINITE
    } else {
        Cost::new(rng.random_range(0..=1024) as f64 / 64.0)
    }
}

fn random_single_user_problem(rng: &mut ChaCha8Rng) -> SingleUserProblem {
    let num_channels = rng.random_range(0..=3);
    let num_formats = rng.random_range(2..=4); // Q in 1..=3
    let mut costs = Vec::new();
    let mut powers = Vec::new();
    for _ in 0..num_channels {
        for h in 0..num_formats {
            costs.push(dyadic_cost(rng, 0.1));
            powers.push(if h == 0 { 0.0 } else { rng.random_range(0..=22) as f64 });
        }
    }
    SingleUserProblem {
        costs,
        powers,
        num_channels,
        num_formats,
        rate_floor: rng.random_range(0..=(num_formats - 1) * num_channels + 1),
        power_budget: rng.random_range(0..=20) as f64,
    }
}

#[test]
fn dp_matches_single_user_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    for case in 0..300 {
        let problem = random_single_user_problem(&mut rng);
        let restricted = RestrictedProblem::from_real(&problem, 1000);
        assert_eq!(restricted.power_scale, 1.0, "integral data must pass through");
        let (dp_value, dp_formats) = dp_solve(&restricted);
        let (bf_value, bf_formats) = oracle::brute_force_single_user(&problem).unwrap();
        assert_eq!(dp_value, bf_value, "case {case}: {problem:?}");
        assert_eq!(dp_formats, bf_formats, "case {case}: {problem:?}");
    }
}

#[test]
fn dp_relaxed_matches_uncapped_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CF);
    for case in 0..300 {
        let mut problem = random_single_user_problem(&mut rng);
        problem.power_budget = f64::INFINITY;
        let (dp_value, dp_formats) = dp::dp_solve_relaxed(&problem);
        let (bf_value, bf_formats) = oracle::brute_force_single_user(&problem).unwrap();
        assert_eq!(dp_value, bf_value, "case {case}");
        assert_eq!(dp_formats, bf_formats, "case {case}");
    }
}

#[test]
fn quantized_dp_never_accepts_a_real_infeasible_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for _ in 0..200 {
        let num_channels = rng.random_range(1..=3);
        let num_formats = rng.random_range(2..=3);
        let mut costs = Vec::new();
        let mut powers = Vec::new();
        for _ in 0..num_channels {
            for h in 0..num_formats {
                let p = if h == 0 { 0.0 } else { rng.random::<f64>() * 8.0 };
                costs.push(Cost::new(p));
                powers.push(p);
            }
        }
        let problem = SingleUserProblem {
            costs,
            powers,
            num_channels,
            num_formats,
            rate_floor: rng.random_range(0..=(num_formats - 1) * num_channels),
            power_budget: rng.random::<f64>() * 10.0,
        };
        // Coarse resolution to stress the rounding.
        let (value, formats) = dp::solve_real(&problem, 25);
        if value.is_finite() {
            let real_power: f64 = formats
                .iter()
                .enumerate()
                .map(|(f, &h)| problem.power(f, h as usize))
                .sum();
            assert!(
                real_power <= problem.power_budget * (1.0 + 1e-12),
                "accepted {real_power} over budget {}",
                problem.power_budget
            );
            let rate: usize = formats.iter().map(|&h| h as usize).sum();
            assert!(rate >= problem.rate_floor);
        }
        // Conservative quantization can only tighten the problem.
        let (bf_value, _) = oracle::brute_force_single_user(&problem).unwrap();
        assert!(bf_value.raw() <= value.raw() + 1e-12 * value.raw().abs().max(1.0));
    }
}

fn random_messages(rng: &mut ChaCha8Rng, count: usize, num_formats: usize) -> Vec<Message> {
    (0..count)
        .map(|_| {
            Message::from_costs((0..num_formats).map(|_| dyadic_cost(rng, 0.15)).collect())
        })
        .collect()
}

/// Messages with the shape exclusivity nodes produce: entry 0 at most the
/// common value of every active entry.
fn structured_messages(rng: &mut ChaCha8Rng, count: usize, num_formats: usize) -> Vec<Message> {
    (0..count)
        .map(|_| {
            let active = dyadic_cost(rng, 0.1);
            let silent = if active.is_finite() {
                Cost::new(rng.random_range(0..=64) as f64 / 64.0 * active.raw().min(8.0))
            } else if rng.random::<f64>() < 0.5 {
                Cost::INFINITE
            } else {
                Cost::new(rng.random_range(0..=256) as f64 / 64.0)
            };
            let mut values = vec![silent.min(active)];
            values.extend(core::iter::repeat_n(active, num_formats - 1));
            Message::from_costs(values)
        })
        .collect()
}

#[test]
fn c_node_closed_form_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    for case in 0..300 {
        let degree = rng.random_range(1..=3);
        let num_formats = rng.random_range(2..=4);
        let incoming = random_messages(&mut rng, degree, num_formats);
        let target = rng.random_range(0..degree);
        let fast = mp::c_node_update(&incoming, target);
        let slow = oracle::brute_force_c_message(&incoming, target).unwrap();
        assert_eq!(fast, slow, "case {case}: {incoming:?} target {target}");
    }
}

/// Instance whose powers are exact integers: B·N0 = 1, gains 1/k.
fn integer_power_instance(rng: &mut ChaCha8Rng, users: usize, chans: usize, q: usize) -> ProblemInstance {
    let gains: Vec<f64> = (0..users * chans)
        .map(|_| 1.0 / rng.random_range(1..=8) as f64)
        .collect();
    ProblemInstance::new(
        users,
        chans,
        1.0,
        1.0,
        gains,
        vec![0.0; users],
        vec![f64::INFINITY; users],
        FormatSet::new(q, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn w_node_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAE0);
    for case in 0..400 {
        let q = rng.random_range(1..=2);
        let chans = rng.random_range(1..=3);
        let instance = integer_power_instance(&mut rng, 1, chans, q);
        let candidates: Vec<usize> = (0..chans).collect();
        let target = rng.random_range(0..chans);
        // Alternate between arbitrary messages (generic table route) and
        // exclusivity-shaped ones (structured capped route).
        let incoming = if case % 2 == 0 {
            random_messages(&mut rng, chans, q + 1)
        } else {
            structured_messages(&mut rng, chans, q + 1)
        };
        let residual_rate = rng.random_range(0..=(q * chans + 1)) as f64;
        let cap = if rng.random::<f64>() < 0.4 {
            f64::INFINITY
        } else {
            rng.random_range(3..=40) as f64
        };
        let fast = mp::w_node_update(&instance, 0, &candidates, target, &incoming, residual_rate, cap);
        let slow = oracle::brute_force_w_message(
            &instance,
            0,
            &candidates,
            target,
            &incoming,
            residual_rate,
            cap,
        )
        .unwrap();
        assert_eq!(fast, slow, "case {case} rate {residual_rate} cap {cap}");
    }
}

#[test]
fn tree_instances_reduce_to_independent_solo_optima() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7EE);
    for case in 0..30 {
        let users = rng.random_range(1..=3);
        let per_user = rng.random_range(2..=3);
        let chans = users * per_user;
        // Give each user a dominant block so candidate sets are disjoint.
        let mut gains = vec![0.0; users * chans];
        for u in 0..users {
            for f in 0..chans {
                let block = f / per_user == u;
                let base = if block { 1.0 + rng.random::<f64>() } else { 0.001 + 0.001 * rng.random::<f64>() };
                gains[u * chans + f] = base;
            }
        }
        let q = 2;
        let demand_units = rng.random_range(1..=q * per_user);
        let cap = if case % 4 == 0 { 50.0 + rng.random::<f64>() * 50.0 } else { f64::INFINITY };
        let instance = ProblemInstance::new(
            users,
            chans,
            1.0,
            1.0,
            gains,
            vec![demand_units as f64; users],
            vec![cap; users],
            FormatSet::new(q, 1.0).unwrap(),
        )
        .unwrap();

        let config = MpConfig { candidate_size: per_user, ..MpConfig::default() };
        let result = mp::run_mp(&instance, &config);

        let mut expected = ramp_core::problem::Allocation::silent(users, chans);
        let mut value_sum = 0.0;
        let mut all_feasible = true;
        for u in 0..users {
            let cands = candidate_set(&instance, u, per_user, &vec![false; chans]);
            let (value, formats) = dp::solve_user(
                &instance,
                u,
                &cands,
                demand_units as f64,
                cap,
                dp::DEFAULT_POWER_RESOLUTION,
            );
            if !value.is_finite() {
                all_feasible = false;
                break;
            }
            value_sum += value.raw();
            for (pos, &f) in cands.iter().enumerate() {
                expected.set(u, f, formats[pos]);
            }
        }
        if !all_feasible {
            continue;
        }
        assert!(result.all_fulfilled(), "case {case}");
        assert_eq!(result.allocation, expected, "case {case}");
        assert_eq!(result.total_power, expected.total_power(&instance), "case {case}");
        let rel = (result.total_power - value_sum).abs() / value_sum.max(1e-30);
        assert!(rel <= 1e-12, "case {case}: {} vs {}", result.total_power, value_sum);
    }
}

#[test]
fn small_cyclic_instances_stay_near_the_global_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A11);
    let mut feasible = 0;
    let mut good = 0;
    for _ in 0..40 {
        let gains: Vec<f64> = (0..8).map(|_| 0.2 + rng.random::<f64>() * 2.0).collect();
        let demand = rng.random_range(1..=2) as f64;
        let instance = ProblemInstance::new(
            2,
            4,
            1.0,
            1.0,
            gains,
            vec![demand; 2],
            vec![f64::INFINITY; 2],
            FormatSet::new(1, 1.0).unwrap(),
        )
        .unwrap();
        let cands = CandidateSets::best_for_all(&instance, 2);
        let (best, _) = oracle::brute_force_global(&instance, &cands).unwrap();
        if !best.is_finite() {
            continue;
        }
        feasible += 1;
        let config = MpConfig { candidate_size: 2, ..MpConfig::default() };
        let result = mp::run_mp(&instance, &config);
        if result.all_fulfilled() && result.total_power <= best.raw() * 1.05 + 1e-12 {
            good += 1;
        }
    }
    assert!(feasible > 10, "generator should produce feasible instances");
    assert!(
        good * 10 >= feasible * 9,
        "only {good}/{feasible} instances within 5% of optimum"
    );
}
