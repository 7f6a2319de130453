//! Shortest augmenting path (Hungarian / Jonker-Volgenant style) solver for
//! the square assignment problem, `O(n^3)`.

use rayon::prelude::*;

use super::cost::CostFn;

#[derive(Debug, Clone)]
pub(crate) struct Assignment {
    /// `col_of[i]` is the column matched to row `i`.
    pub col_of: Vec<usize>,
    /// Dual feasibility and complementary slackness hold within round-off.
    pub certified: bool,
}

pub(crate) fn solve(cost: &CostFn<'_>, n: usize) -> Assignment {
    let c: Vec<f64> = (0..n * n).into_par_iter().map(|e| cost.cost(e / n, e % n)).collect();
    solve_dense(&c, n)
}

/// Rows and columns are 1-based internally; index 0 is the virtual source.
pub(crate) fn solve_dense(c: &[f64], n: usize) -> Assignment {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &c[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                // strict comparison keeps the smallest column on ties
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[p[j] - 1] = j - 1;
    }
    let scale = u.iter().chain(&v).fold(1.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-12 * scale;
    let mut certified = true;
    for i in 0..n {
        for j in 0..n {
            let slack = c[i * n + j] - u[i + 1] - v[j + 1];
            if slack < -tol || (col_of[i] == j && slack.abs() > tol) {
                certified = false;
            }
        }
    }
    Assignment { col_of, certified }
}
