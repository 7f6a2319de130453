//! Bottleneck assignment: the smallest threshold admitting a perfect
//! matching, found by binary search over the sorted distances with
//! Hopcroft-Karp as the feasibility test.

use std::collections::VecDeque;

use crate::neighbors::distance;

const NONE: usize = usize::MAX;

/// Rows sorted by distance; the admissible edges for threshold `t` are a
/// prefix of each row.
struct SortedRows {
    n: usize,
    /// `(distance, column)` per row, ascending by `(distance, column)`.
    rows: Vec<Vec<(f64, usize)>>,
}

impl SortedRows {
    fn new(a: &[f64], b: &[f64], dim: usize, n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let x = &a[i * dim..(i + 1) * dim];
                let mut r: Vec<(f64, usize)> =
                    (0..n).map(|j| (distance(x, &b[j * dim..(j + 1) * dim]), j)).collect();
                r.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
                r
            })
            .collect();
        Self { n, rows }
    }

    fn prefix(&self, i: usize, t: f64) -> &[(f64, usize)] {
        let row = &self.rows[i];
        let k = row.partition_point(|e| e.0 <= t);
        &row[..k]
    }
}

/// Maximum matching restricted to edges with distance `<= t`.
/// Returns `row -> column` with `NONE` for unmatched rows.
fn hopcroft_karp(g: &SortedRows, t: f64) -> (usize, Vec<usize>) {
    let n = g.n;
    let mut match_row = vec![NONE; n];
    let mut match_col = vec![NONE; n];
    let mut dist = vec![0usize; n];
    let mut size = 0;
    loop {
        // BFS layering from free rows.
        let mut queue = VecDeque::new();
        for i in 0..n {
            if match_row[i] == NONE {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = NONE;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &(_, j) in g.prefix(i, t) {
                let k = match_col[j];
                if k == NONE {
                    found = true;
                } else if dist[k] == NONE {
                    dist[k] = dist[i] + 1;
                    queue.push_back(k);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n];
        for i in 0..n {
            if match_row[i] == NONE && augment(g, t, i, &mut dist, &mut it, &mut match_row, &mut match_col)
            {
                size += 1;
            }
        }
    }
    (size, match_row)
}

/// Iterative layered DFS from free row `start`.
fn augment(
    g: &SortedRows,
    t: f64,
    start: usize,
    dist: &mut [usize],
    it: &mut [usize],
    match_row: &mut [usize],
    match_col: &mut [usize],
) -> bool {
    let mut stack = vec![start];
    while let Some(&i) = stack.last() {
        let edges = g.prefix(i, t);
        let mut advanced = false;
        while it[i] < edges.len() {
            let j = edges[it[i]].1;
            let k = match_col[j];
            if k == NONE {
                // Flip the alternating path held on the stack.
                let mut col = j;
                while let Some(r) = stack.pop() {
                    let prev = match_row[r];
                    match_row[r] = col;
                    match_col[col] = r;
                    col = prev;
                }
                return true;
            }
            if dist[k] == dist[i] + 1 {
                stack.push(k);
                advanced = true;
                break;
            }
            it[i] += 1;
        }
        if !advanced {
            dist[i] = NONE;
            stack.pop();
            if let Some(&parent) = stack.last() {
                it[parent] += 1;
            }
        }
    }
    false
}

/// Bottleneck value and a perfect matching attaining it.
pub(crate) fn solve(a: &[f64], b: &[f64], dim: usize, n: usize) -> (f64, Vec<usize>) {
    let g = SortedRows::new(a, b, dim, n);
    let mut all: Vec<f64> = g.rows.iter().flat_map(|r| r.iter().map(|e| e.0)).collect();
    all.sort_unstable_by(f64::total_cmp);
    all.dedup();
    // Every row must reach some column, so the answer is at least the
    // largest row minimum.
    let lower = g.rows.iter().map(|r| r[0].0).fold(0.0f64, f64::max);
    let mut lo = all.partition_point(|&d| d < lower);
    let mut hi = all.len() - 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if hopcroft_karp(&g, all[mid]).0 == n {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let (size, m) = hopcroft_karp(&g, all[lo]);
    debug_assert_eq!(size, n);
    (all[lo], m)
}
