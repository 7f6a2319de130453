//! Particle configurations and their distance statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::neighbors::{distance, k_nearest, CellGrid};
use crate::summation::Compensated;

/// `N` labelled points in `R^d` at time `time`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub time: f64,
}

impl ParticleConfig {
    pub fn new(dim: usize, positions: Vec<f64>, time: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(invalid(format!(
                "position array of length {} is not a nonempty multiple of d = {dim}",
                positions.len()
            )));
        }
        if let Some(k) = positions.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite coordinate at particle {}", k / dim)));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(invalid(format!("time must be finite and nonnegative, got {time}")));
        }
        Ok(Self { dim, positions, time })
    }

    pub fn from_rows(rows: &[Vec<f64>], time: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("rows have different lengths"));
        }
        Self::new(dim, rows.concat(), time)
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j))
    }

    /// Diagonal of the axis-aligned bounding box; an upper bound on the
    /// diameter within a factor `sqrt(d)`.
    pub fn bbox_diagonal(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let (lo, hi) = self
                .positions
                .iter()
                .skip(k)
                .step_by(self.dim)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            s += (hi - lo) * (hi - lo);
        }
        s.sqrt()
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut acc = vec![Compensated::new(); self.dim];
        for p in self.positions.chunks_exact(self.dim) {
            for (a, v) in acc.iter_mut().zip(p) {
                a.add(*v);
            }
        }
        acc.iter().map(|a| a.value() / self.n() as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d_min: f64,
    /// Nearest neighbour of each particle, ties to the smallest index.
    pub nn_index: Vec<usize>,
    pub nn_dist: Vec<f64>,
    /// `min_i min_{j != i, i_nn}` d_ij; `+inf` when `N = 2`.
    #[serde(with = "crate::jsonfloat")]
    pub d_min1: f64,
    /// False when `d_min1` is undefined (`N = 2`).
    pub d_min1_defined: bool,
    /// Distance from each particle to its second-nearest neighbour.
    pub second_dist: Vec<f64>,
    pub delta: f64,
    /// Particles whose nearest neighbour is strictly closer than `delta`.
    pub close_set: Vec<usize>,
    pub close_mass: f64,
}

impl DistanceReport {
    /// `t,d_min,d_min1,close_mass,S` with shortest round-trip floats.
    pub fn csv_row(&self, t: f64, s_value: f64) -> String {
        format!(
            "{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(self.d_min),
            fmt_f64(self.d_min1),
            fmt_f64(self.close_mass),
            fmt_f64(s_value)
        )
    }

    pub const CSV_HEADER: &'static str = "t,d_min,d_min1,close_mass,S";
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn distance_report(config: &ParticleConfig, delta: f64) -> Result<DistanceReport> {
    let n = config.n();
    if n < 2 {
        return Err(invalid(format!("distance statistics need N >= 2, got {n}")));
    }
    if !(delta >= 0.0) {
        return Err(invalid(format!("delta must be nonnegative, got {delta}")));
    }
    let knn = k_nearest(&config.positions, config.dim, 2);
    let nn_index: Vec<usize> = knn.iter().map(|l| l[0].1).collect();
    let nn_dist: Vec<f64> = knn.iter().map(|l| l[0].0).collect();
    let second_dist: Vec<f64> =
        knn.iter().map(|l| l.get(1).map_or(f64::INFINITY, |p| p.0)).collect();
    let d_min = nn_dist.iter().copied().fold(f64::INFINITY, f64::min);
    let d_min1 = second_dist.iter().copied().fold(f64::INFINITY, f64::min);
    let close_set: Vec<usize> = (0..n).filter(|&i| nn_dist[i] < delta).collect();
    let close_mass = close_set.len() as f64 / n as f64;
    Ok(DistanceReport {
        d_min,
        nn_index,
        nn_dist,
        d_min1,
        d_min1_defined: n >= 3,
        second_dist,
        delta,
        close_set,
        close_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSums {
    pub per_particle: Vec<f64>,
    /// `S_{beta,delta}`, the maximum of `per_particle`.
    pub max: f64,
}

/// Per-particle `sum_{j: d_ij > delta} d_ij^{-beta}` in ascending `j` with
/// compensated accumulation, and their maximum.
pub fn cutoff_sum(config: &ParticleConfig, beta: f64, delta: f64) -> Result<CutoffSums> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if !(delta >= 0.0) {
        return Err(invalid(format!("delta must be nonnegative, got {delta}")));
    }
    let n = config.n();
    let per_particle: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = config.point(i);
            let mut acc = Compensated::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = distance(x, config.point(j));
                if d > delta {
                    acc.add(d.powf(-beta));
                }
            }
            acc.value()
        })
        .collect();
    let max = per_particle.iter().copied().fold(0.0, f64::max);
    Ok(CutoffSums { per_particle, max })
}

/// Adjacency lists of all pairs with `d_ij <= radius`, each list ascending.
pub fn neighbor_index(config: &ParticleConfig, radius: f64) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let grid = CellGrid::new(&config.positions, config.dim, radius);
    Ok((0..config.n())
        .map(|i| {
            let mut adj = Vec::new();
            grid.for_each_within(i, radius, |j, _| adj.push(j));
            adj.sort_unstable();
            adj
        })
        .collect())
}

/// `sup_i #{j : |X_j - X_i| < delta}`, counting `i` itself.
pub fn max_ball_count(config: &ParticleConfig, delta: f64) -> usize {
    if !(delta > 0.0) {
        return 1;
    }
    let grid = CellGrid::new(&config.positions, config.dim, delta);
    (0..config.n())
        .map(|i| {
            let mut c = 1;
            grid.for_each_within(i, delta, |_, d| {
                if d < delta {
                    c += 1
                }
            });
            c
        })
        .max()
        .unwrap_or(0)
}
