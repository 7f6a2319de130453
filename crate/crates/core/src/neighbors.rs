//! Uniform cell grid over a point set stored row-major (`n x dim`).
//!
//! Queries are exact: a query of radius `r` scans the `ceil(r/edge)`-ring of
//! cells around the query cell, so every point within `r` is visited.

/// Euclidean distance, summed in coordinate order. Every statistic in the
/// crate goes through this function so accelerated and brute-force paths
/// agree bitwise.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s.sqrt()
}

#[derive(Debug, Clone)]
pub struct CellGrid<'a> {
    pos: &'a [f64],
    dim: usize,
    origin: Vec<f64>,
    edge: f64,
    shape: Vec<usize>,
    /// `start[c]..start[c + 1]` indexes `order` for cell `c`.
    start: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> CellGrid<'a> {
    /// Builds a grid whose cell edge is at least `edge`. The edge is enlarged
    /// when needed to keep the cell count near `4n`.
    pub fn new(pos: &'a [f64], dim: usize, edge: f64) -> Self {
        assert!(dim >= 1 && pos.len() % dim == 0);
        let n = pos.len() / dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in pos.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if n == 0 {
            lo.fill(0.0);
            hi.fill(0.0);
        }
        let span = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0f64, f64::max);
        let mut edge = if edge > 0.0 && edge.is_finite() { edge } else { span.max(1.0) };
        let cap = (4 * n).max(64) as f64;
        let shape = loop {
            let shape: Vec<usize> =
                (0..dim).map(|k| ((hi[k] - lo[k]) / edge).floor() as usize + 1).collect();
            let cells = shape.iter().fold(1.0f64, |a, &s| a * s as f64);
            if cells <= cap {
                break shape;
            }
            edge *= (cells / cap).powf(1.0 / dim as f64).max(1.01);
        };
        let total: usize = shape.iter().product();
        let mut grid = Self {
            pos,
            dim,
            origin: lo,
            edge,
            shape,
            start: vec![0; total + 1],
            order: vec![0; n],
        };
        let cells: Vec<usize> = (0..n).map(|i| grid.cell_of(grid.point(i))).collect();
        for &c in &cells {
            grid.start[c + 1] += 1;
        }
        for c in 0..total {
            grid.start[c + 1] += grid.start[c];
        }
        let mut fill = grid.start.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.order[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    #[inline]
    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.pos[i * self.dim..(i + 1) * self.dim]
    }

    fn coord(&self, x: &[f64], k: usize) -> usize {
        let c = ((x[k] - self.origin[k]) / self.edge).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.shape[k] - 1)
        }
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        let mut c = 0;
        for k in (0..self.dim).rev() {
            c = c * self.shape[k] + self.coord(x, k);
        }
        c
    }

    /// Calls `f(j, d_ij)` for every `j != i` with `d_ij <= radius`, in no
    /// particular order.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, i: usize, radius: f64, mut f: F) {
        let x = self.point(i);
        self.scan(x, radius, |j, d| {
            if j != i {
                f(j, d)
            }
        });
    }

    /// Calls `f(j, |x - X_j|)` for every point with distance `<= radius`.
    pub fn scan<F: FnMut(usize, f64)>(&self, x: &[f64], radius: f64, mut f: F) {
        let reach = ((radius / self.edge).ceil() as isize).max(1);
        let centre: Vec<isize> = (0..self.dim).map(|k| self.coord(x, k) as isize).collect();
        let lo: Vec<isize> = centre.iter().map(|c| (c - reach).max(0)).collect();
        let hi: Vec<isize> = centre
            .iter()
            .zip(&self.shape)
            .map(|(c, &s)| (c + reach).min(s as isize - 1))
            .collect();
        let mut cur = lo.clone();
        loop {
            let mut c = 0usize;
            for k in (0..self.dim).rev() {
                c = c * self.shape[k] + cur[k] as usize;
            }
            for &j in &self.order[self.start[c]..self.start[c + 1]] {
                let d = distance(x, self.point(j));
                if d <= radius {
                    f(j, d);
                }
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return;
                }
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
                k += 1;
            }
        }
    }
}

/// All pairs `(i, j)`, `i < j`, with `d_ij <= radius`, sorted.
pub fn pairs_within(pos: &[f64], dim: usize, radius: f64) -> Vec<(usize, usize)> {
    let grid = CellGrid::new(pos, dim, radius);
    let mut out = Vec::new();
    for i in 0..grid.len() {
        let start = out.len();
        grid.for_each_within(i, radius, |j, _| {
            if j > i {
                out.push((i, j));
            }
        });
        out[start..].sort_unstable();
    }
    out
}

/// The `k` nearest neighbours of every point, sorted by `(distance, index)`.
/// Points with fewer than `k` others get shorter lists.
pub fn k_nearest(pos: &[f64], dim: usize, k: usize) -> Vec<Vec<(f64, usize)>> {
    let n = pos.len() / dim;
    if n == 0 || k == 0 {
        return vec![Vec::new(); n];
    }
    let k_eff = k.min(n - 1);
    // Radius expected to hold about ten neighbours for a uniform cloud.
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in pos.chunks_exact(dim) {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    let diag = (0..dim).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt();
    let floor = span * 1e-3;
    let vol: f64 = (0..dim).map(|a| (hi[a] - lo[a]).max(floor)).product();
    let want = (10.0 + 2.0 * k_eff as f64) / n as f64;
    let r0 = (want * vol).powf(1.0 / dim as f64);
    let r0 = if r0 > 0.0 && r0.is_finite() { r0.min(diag) } else { 1.0 };
    let grid = CellGrid::new(pos, dim, r0);

    let mut out = Vec::with_capacity(n);
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let mut r = r0;
        loop {
            cand.clear();
            grid.for_each_within(i, r, |j, d| cand.push((d, j)));
            if cand.len() >= k_eff || r >= diag {
                break;
            }
            r = (2.0 * r).min(diag.max(r));
            if r <= 0.0 {
                break;
            }
        }
        if cand.len() < k_eff {
            cand.clear();
            let x = grid.point(i);
            for j in (0..n).filter(|&j| j != i) {
                cand.push((distance(x, grid.point(j)), j));
            }
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(cand[..k_eff].to_vec());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn pairs_examples() {
        let pts = [0.0, 0.0, 1.0, 0.0, 3.0, 0.0];
        assert_eq!(pairs_within(&pts, 2, 1.2), vec![(0, 1)]);
        assert_eq!(pairs_within(&pts, 2, 3.5), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(pairs_within(&pts, 2, 0.5).is_empty());
    }

    #[test]
    fn pairs_match_brute_force() {
        for (seed, dim) in [(1u64, 1usize), (2, 2), (3, 3)] {
            let pts = random(300, dim, seed);
            let r = 0.08;
            let mut brute = Vec::new();
            for i in 0..300 {
                for j in i + 1..300 {
                    if distance(&pts[i * dim..(i + 1) * dim], &pts[j * dim..(j + 1) * dim]) <= r {
                        brute.push((i, j));
                    }
                }
            }
            assert_eq!(pairs_within(&pts, dim, r), brute);
        }
    }

    #[test]
    fn knn_matches_brute_force_with_duplicates() {
        let mut pts = random(400, 2, 9);
        pts[10] = pts[0];
        pts[11] = pts[1];
        pts[20] = pts[0];
        pts[21] = pts[1];
        let knn = k_nearest(&pts, 2, 3);
        for i in 0..400 {
            let mut all: Vec<(f64, usize)> = (0..400)
                .filter(|&j| j != i)
                .map(|j| (distance(&pts[2 * i..2 * i + 2], &pts[2 * j..2 * j + 2]), j))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            assert_eq!(knn[i], all[..3].to_vec());
        }
    }

    #[test]
    fn knn_clustered_and_degenerate() {
        // two far clusters: radius guess is too small for the isolated point
        let mut pts = random(50, 3, 4);
        pts.extend_from_slice(&[100.0, 100.0, 100.0]);
        let knn = k_nearest(&pts, 3, 2);
        assert_eq!(knn[50].len(), 2);
        let same = vec![1.0; 12];
        let knn = k_nearest(&same, 3, 3);
        assert_eq!(knn[0], vec![(0.0, 1), (0.0, 2), (0.0, 3)]);
        let two = [0.0, 0.0, 3.0, 4.0];
        assert_eq!(k_nearest(&two, 2, 2)[1], vec![(5.0, 0)]);
    }
}
