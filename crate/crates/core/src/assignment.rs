//! Minimum-cost rectangular assignment by shortest augmenting paths.
//!
//! The solver is deterministic: rows are processed in index order and column
//! scans break ties toward the lowest index, so equal-cost optima always
//! resolve the same way.

/// Solve the rectangular assignment problem on a row-major cost matrix.
///
/// Returns, for each row, the column assigned to it. Every row is assigned
/// when `rows <= cols`; otherwise every column is assigned and the surplus
/// rows come back `None`. Total assigned cost is minimal.
pub fn min_cost_assignment(cost: &[f64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    assert_eq!(cost.len(), rows * cols, "cost matrix shape mismatch");
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve_wide(&|i, j| cost[i * cols + j], rows, cols)
    } else {
        // transpose so the augmenting side is the smaller one, then invert
        let col_to_row = solve_wide(&|j, i| cost[i * cols + j], cols, rows);
        let mut row_to_col = vec![None; rows];
        for (j, r) in col_to_row.iter().enumerate() {
            if let Some(i) = r {
                row_to_col[*i] = Some(j);
            }
        }
        row_to_col
    }
}

/// Shortest-augmenting-path assignment for `n <= m`. `cost(i, j)` addresses
/// row i, column j. Potentials keep reduced costs non-negative; each round
/// grows one augmenting path via Dijkstra over columns.
fn solve_wide(cost: &dyn Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<Option<usize>> {
    // 1-based sentinels in p/way per the classical formulation
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1]; // p[j] = row matched to column j (1-based, 0 = free)
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = Some(j - 1);
        }
    }
    row_to_col
}

#[cfg(test)]
pub(crate) fn brute_force_min_cost(cost: &[f64], rows: usize, cols: usize) -> f64 {
    // enumerate injections of the smaller side into the larger
    fn rec(cost: &[f64], rows: usize, cols: usize, i: usize, used: &mut [bool], acc: f64) -> f64 {
        if i == rows {
            return acc;
        }
        let mut best = f64::INFINITY;
        for j in 0..cols {
            if !used[j] {
                used[j] = true;
                best = best.min(rec(cost, rows, cols, i + 1, used, acc + cost[i * cols + j]));
                used[j] = false;
            }
        }
        best
    }
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if rows <= cols {
        rec(cost, rows, cols, 0, &mut vec![false; cols], 0.0)
    } else {
        let t: Vec<f64> = (0..cols)
            .flat_map(|j| (0..rows).map(move |i| (i, j)))
            .map(|(i, j)| cost[i * cols + j])
            .collect();
        rec(&t, cols, rows, 0, &mut vec![false; rows], 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[f64], cols: usize, assignment: &[Option<usize>]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| cost[i * cols + j]))
            .sum()
    }

    #[test]
    fn two_by_two_picks_the_diagonal() {
        let cost = [1.0, 10.0, 10.0, 1.0];
        let a = min_cost_assignment(&cost, 2, 2);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert_eq!(total(&cost, 2, &a), 2.0);
    }

    #[test]
    fn empty_sides_assign_nothing() {
        assert_eq!(min_cost_assignment(&[], 0, 0), Vec::<Option<usize>>::new());
        assert_eq!(min_cost_assignment(&[], 3, 0), vec![None, None, None]);
        assert_eq!(min_cost_assignment(&[], 0, 3), Vec::<Option<usize>>::new());
    }

    #[test]
    fn wide_matrix_assigns_every_row() {
        let cost = [5.0, 1.0, 9.0, 2.0, 7.0, 3.0];
        let a = min_cost_assignment(&cost, 2, 3);
        assert!(a.iter().all(Option::is_some));
        assert_eq!(total(&cost, 3, &a), brute_force_min_cost(&cost, 2, 3));
    }

    #[test]
    fn tall_matrix_leaves_surplus_rows_unassigned() {
        let cost = [5.0, 1.0, 9.0, 2.0, 7.0, 3.0];
        let a = min_cost_assignment(&cost, 3, 2);
        assert_eq!(a.iter().filter(|j| j.is_some()).count(), 2);
        assert_eq!(total(&cost, 2, &a), brute_force_min_cost(&cost, 3, 2));
    }

    #[test]
    fn ties_resolve_deterministically() {
        // all-equal costs: row i takes column i by the low-index tie rule
        let cost = [3.0; 9];
        assert_eq!(min_cost_assignment(&cost, 3, 3), vec![Some(0), Some(1), Some(2)]);
    }

    proptest! {
        #[test]
        fn matches_brute_force_up_to_six(
            rows in 1usize..=6,
            cols in 1usize..=6,
            seed in proptest::num::u64::ANY,
        ) {
            // derive a deterministic cost matrix from the seed
            let mut state = seed | 1;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) % 10_000) as f64 / 100.0
            };
            let cost: Vec<f64> = (0..rows * cols).map(|_| next()).collect();
            let a = min_cost_assignment(&cost, rows, cols);
            let got = total(&cost, cols, &a);
            let want = brute_force_min_cost(&cost, rows, cols);
            prop_assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }
    }
}
