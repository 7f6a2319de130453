//! Primal network simplex for the balanced transportation problem between
//! two point clouds.
//!
//! The tree bookkeeping (thread / reverse thread / successor counts, an
//! artificial root, block pivot search, strongly feasible leaving-arc rule)
//! follows the classical LEMON layout. The bipartite arcs are never stored:
//! arc `e < m n` joins supply node `e / n` to demand node `m + e % n` and
//! its cost is recomputed from the coordinates. Arcs outside the tree carry
//! zero flow (there are no capacities), so flow is stored per tree node on
//! the arc to its parent.

use super::cost::CostFn;

const NONE: usize = usize::MAX;
const UP: i64 = 1;
const DOWN: i64 = -1;
/// Relative tolerance on reduced costs.
const EPS: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// `(i, j, units)` for every positive flow, sorted by `(i, j)`.
    pub flows: Vec<(usize, usize, i64)>,
    /// Primal feasibility, and no bipartite arc with negative reduced cost
    /// under the exactly recomputed potentials.
    pub certified: bool,
}

struct Simplex<'a> {
    cost: &'a CostFn<'a>,
    m: usize,
    n: usize,
    arcs: usize,
    root: usize,
    supply: Vec<i64>,
    art_cost: f64,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i64>,
    pflow: Vec<i64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    block: usize,
    next_arc: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

impl<'a> Simplex<'a> {
    fn new(cost: &'a CostFn<'a>, supply_a: &[i64], demand_b: &[i64]) -> Self {
        let m = supply_a.len();
        let n = demand_b.len();
        let nodes = m + n;
        let root = nodes;
        let arcs = m * n;
        let mut supply = Vec::with_capacity(nodes);
        supply.extend_from_slice(supply_a);
        supply.extend(demand_b.iter().map(|d| -d));
        // Normalised costs lie in [0, 1]; this dominates any real path.
        let art_cost = (cost.max_cost() + 1.0) * nodes as f64;
        let mut s = Self {
            cost,
            m,
            n,
            arcs,
            root,
            supply,
            art_cost,
            parent: vec![root; nodes + 1],
            pred: vec![NONE; nodes + 1],
            pred_dir: vec![UP; nodes + 1],
            pflow: vec![0; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![1; nodes + 1],
            last_succ: vec![0; nodes + 1],
            pi: vec![0.0; nodes + 1],
            dirty_revs: Vec::new(),
            block: ((arcs as f64).sqrt() as usize).max(10),
            next_arc: 0,
            in_arc: NONE,
            join: NONE,
            u_in: NONE,
            v_in: NONE,
            u_out: NONE,
            delta: 0,
        };
        for u in 0..nodes {
            s.parent[u] = root;
            s.pred[u] = arcs + u;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            if s.supply[u] >= 0 {
                s.pred_dir[u] = UP;
                s.pi[u] = 0.0;
                s.pflow[u] = s.supply[u];
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.pflow[u] = -s.supply[u];
            }
        }
        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;
        s
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arcs {
            e / self.n
        } else {
            let u = e - self.arcs;
            if self.supply[u] >= 0 {
                u
            } else {
                self.root
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arcs {
            self.m + e % self.n
        } else {
            let u = e - self.arcs;
            if self.supply[u] >= 0 {
                self.root
            } else {
                u
            }
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arcs {
            self.cost.cost(e / self.n, e % self.n)
        } else if self.supply[e - self.arcs] >= 0 {
            0.0
        } else {
            self.art_cost
        }
    }

    /// Reduced cost of real arc `(i, j)` if it may enter, i.e. if it is not
    /// a tree arc and is negative beyond round-off.
    #[inline]
    fn entering_value(&self, i: usize, j: usize, e: usize) -> Option<f64> {
        let t = self.m + j;
        if self.pred[i] == e || self.pred[t] == e {
            return None;
        }
        let c = self.cost.cost(i, j);
        let (ps, pt) = (self.pi[i], self.pi[t]);
        let rc = c + ps - pt;
        let scale = ps.abs().max(pt.abs()).max(c);
        if rc < -EPS * scale {
            Some(rc)
        } else {
            None
        }
    }

    /// Block search pivot rule.
    fn find_entering_arc(&mut self) -> bool {
        let total = self.arcs;
        let mut min = 0.0;
        let mut cnt = self.block;
        let mut e = self.next_arc;
        let mut found = false;
        let (mut i, mut j) = (e / self.n, e % self.n);
        for _ in 0..total {
            if let Some(rc) = self.entering_value(i, j, e) {
                if rc < min {
                    min = rc;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            j += 1;
            if j == self.n {
                j = 0;
                i += 1;
            }
            if e == total {
                e = 0;
                i = 0;
                j = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP && self.pflow[u] < delta {
                delta = self.pflow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN && self.pflow[u] <= delta {
                delta = self.pflow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pflow[u] -= self.pred_dir[u] * val;
                u = self.parent[u];
            }
            u = self.target(self.in_arc);
            while u != self.join {
                self.pflow[u] += self.pred_dir[u] * val;
                u = self.parent[u];
            }
        }
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join) = (self.u_in, self.v_in, self.u_out, self.join);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(self.in_arc) { UP } else { DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pflow[u_in] = self.delta;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem u_in .. u_out and splice the thread.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Reverse pred arcs, flows and successor data along the stem.
            let mut tmp_sc: isize = 0;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pflow[u] = self.pflow[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = in_dir;
            self.pflow[u_in] = self.delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes every potential from the tree, removing drift.
    fn recompute_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            let c = self.arc_cost(self.pred[u]);
            self.pi[u] = if self.pred_dir[u] == UP { self.pi[p] - c } else { self.pi[p] + c };
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> u64 {
        let mut pivots = 0u64;
        loop {
            if !self.find_entering_arc() {
                self.recompute_potentials();
                if !self.find_entering_arc() {
                    break;
                }
            }
            self.find_join_node();
            let bounded = self.find_leaving_arc();
            assert!(bounded, "transportation problem cannot be unbounded");
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
        }
        pivots
    }

    fn min_reduced_cost(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.m {
            let pi_i = self.pi[i];
            for j in 0..self.n {
                let rc = self.cost.cost(i, j) + pi_i - self.pi[self.m + j];
                if rc < min {
                    min = rc;
                }
            }
        }
        min
    }
}

/// Solves `min sum c_ij f_ij` subject to row sums `supply` and column sums
/// `demand` (equal totals), `f >= 0`.
pub(crate) fn solve(cost: &CostFn<'_>, supply: &[i64], demand: &[i64]) -> FlowSolution {
    debug_assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>());
    let mut s = Simplex::new(cost, supply, demand);
    s.run();
    s.recompute_potentials();

    let mut flows = Vec::new();
    let mut artificial_flow = 0i64;
    for u in 0..s.root {
        let e = s.pred[u];
        if s.pflow[u] == 0 {
            continue;
        }
        if e >= s.arcs {
            artificial_flow += s.pflow[u];
        } else {
            flows.push((e / s.n, e % s.n, s.pflow[u]));
        }
    }
    flows.sort_unstable();

    let mut row = vec![0i64; s.m];
    let mut col = vec![0i64; s.n];
    let mut negative = false;
    for &(i, j, f) in &flows {
        row[i] += f;
        col[j] += f;
        negative |= f < 0;
    }
    let primal = !negative && artificial_flow == 0 && row == supply && col == demand;
    let min_rc = s.min_reduced_cost();
    let pi_scale = s.pi.iter().fold(1.0f64, |a, p| a.max(p.abs()));
    let dual = min_rc >= -1e3 * EPS * pi_scale;
    FlowSolution { flows, certified: primal && dual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_is_certified() {
        // two points on a line against two shifted copies: identity is optimal
        let a = [0.0, 1.0];
        let b = [0.1, 1.1];
        let c = CostFn::new(&a, &b, 1, 2.0);
        let s = solve(&c, &[2, 1], &[2, 1]);
        assert!(s.certified);
        assert_eq!(s.flows, vec![(0, 0, 2), (1, 1, 1)]);
    }
}
