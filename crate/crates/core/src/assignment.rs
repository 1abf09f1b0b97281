//! Exact minimum-cost square assignment via shortest augmenting paths with
//! potentials (Jonker-Volgenant style), O(n³).

use alloc::vec;
use alloc::vec::Vec;

/// Assigns each of `n` rows to a distinct column minimizing the total cost.
/// Returns the column chosen for every row.
pub(crate) fn min_cost_assignment<C>(n: usize, cost: C) -> Vec<usize>
where
    C: Fn(usize, usize) -> f64,
{
    // job[w] = row currently matched to column w; column n is virtual.
    let mut job = vec![usize::MAX; n + 1];
    let mut row_potential = vec![0.0f64; n];
    let mut col_potential = vec![0.0f64; n + 1];

    for row in 0..n {
        let mut w_cur = n;
        job[w_cur] = row;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![usize::MAX; n + 1];
        let mut in_tree = vec![false; n + 1];

        while job[w_cur] != usize::MAX {
            in_tree[w_cur] = true;
            let j = job[w_cur];
            let mut delta = f64::INFINITY;
            let mut w_next = 0;
            for w in 0..n {
                if in_tree[w] {
                    continue;
                }
                let reduced = cost(j, w) - row_potential[j] - col_potential[w];
                if reduced < min_to[w] {
                    min_to[w] = reduced;
                    prev[w] = w_cur;
                }
                if min_to[w] < delta {
                    delta = min_to[w];
                    w_next = w;
                }
            }
            for w in 0..=n {
                if in_tree[w] {
                    row_potential[job[w]] += delta;
                    col_potential[w] -= delta;
                } else {
                    min_to[w] -= delta;
                }
            }
            w_cur = w_next;
        }

        while w_cur != n {
            let w_prev = prev[w_cur];
            job[w_cur] = job[w_prev];
            w_cur = w_prev;
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for w in 0..n {
        if job[w] != usize::MAX {
            row_to_col[job[w]] = w;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
    }

    fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let t: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            if t < best {
                best = t;
            }
        });
        best
    }

    fn permute<F: FnMut(&[usize])>(items: &mut [usize], k: usize, visit: &mut F) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn hand_case() {
        let cost = vec![
            vec![8.0, 5.0, 9.0],
            vec![4.0, 2.0, 4.0],
            vec![7.0, 3.0, 8.0],
        ];
        let assignment = min_cost_assignment(3, |r, c| cost[r][c]);
        assert_eq!(total(&cost, &assignment), 15.0);
    }

    #[test]
    fn matches_permutation_search_on_random_matrices() {
        // Deterministic LCG so the test is reproducible without a dev-dep.
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| next() * 10.0).collect()).collect();
                let assignment = min_cost_assignment(n, |r, c| cost[r][c]);
                let mut seen = vec![false; n];
                for &c in &assignment {
                    assert!(!seen[c], "assignment must be a permutation");
                    seen[c] = true;
                }
                let got = total(&cost, &assignment);
                let want = brute_force_min(&cost);
                assert!((got - want).abs() <= 1e-9 * want.max(1.0), "n={n}: {got} vs {want}");
            }
        }
    }
}
