//! Maximum-weight bipartite assignment (Kuhn–Munkres with potentials).

/// Best one-to-one assignment for a `rows × cols` weight matrix. Every row of
/// the smaller side is matched. Returns `(row, col)` pairs sorted by row, and
/// the total weight summed from the original entries.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = weights.len();
    if rows == 0 {
        return (Vec::new(), 0.0);
    }
    let cols = weights[0].len();
    if cols == 0 {
        return (Vec::new(), 0.0);
    }
    let mut pairs = if rows <= cols {
        min_cost(rows, cols, |i, j| -weights[i][j])
    } else {
        min_cost(cols, rows, |i, j| -weights[j][i])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| weights[i][j]).sum();
    (pairs, total)
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns.
fn min_cost(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}
