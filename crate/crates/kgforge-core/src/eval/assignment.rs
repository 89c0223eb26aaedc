//! Exact minimum-cost assignment (Hungarian algorithm with potentials),
//! O(n²·m) for an n×m matrix with n ≤ m.

/// Solve min-cost assignment for a rectangular cost matrix with
/// `rows ≤ cols`. Returns, for each row, the column it is assigned to.
pub fn solve_min_cost(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment requires rows <= cols");
    const INF: i64 = i64::MAX / 4;

    // 1-indexed potentials; p[j] is the row matched to column j (0 = none).
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Maximize total score instead: negate into costs.
pub fn solve_max_score(score: &[Vec<i64>]) -> Vec<usize> {
    let max = score
        .iter()
        .flat_map(|row| row.iter())
        .copied()
        .max()
        .unwrap_or(0);
    let cost: Vec<Vec<i64>> = score
        .iter()
        .map(|row| row.iter().map(|s| max - s).collect())
        .collect();
    solve_min_cost(&cost)
}
