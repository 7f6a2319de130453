//! Exact discrete optimal transport between weighted point clouds.
//!
//! * equal-size uniform clouds, `p < inf`: linear assignment;
//! * everything else with `p < inf`: network simplex on integer masses;
//! * `p = inf`: bottleneck matching (equal-size uniform clouds only).

mod assignment;
mod bottleneck;
mod cost;
mod network_simplex;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::config_stats::{fmt_f64, ParticleConfig};
use crate::error::{invalid, Error, Result};
use crate::neighbors::{distance, CellGrid};
use crate::stats::median;
use crate::summation::Compensated;

pub use oracle::brute_force_wasserstein;

/// Mass grid for general weights.
const WEIGHT_GRID: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    uniform: bool,
}

impl PointCloud {
    /// Equal weights `1/m`.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        check_points(dim, &points)?;
        let m = points.len() / dim;
        Ok(Self { dim, points, weights: vec![1.0 / m as f64; m], uniform: true })
    }

    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_points(dim, &points)?;
        let m = points.len() / dim;
        if weights.len() != m {
            return Err(invalid(format!("{} weights for {m} points", weights.len())));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::WeightNormalization { sum });
        }
        let uniform = weights.iter().all(|&w| w == 1.0 / m as f64);
        Ok(Self { dim, points, weights, uniform })
    }

    pub fn from_config(config: &ParticleConfig) -> Self {
        let m = config.n();
        Self {
            dim: config.dim,
            points: config.positions.clone(),
            weights: vec![1.0 / m as f64; m],
            uniform: true,
        }
    }

    pub fn m(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

fn check_points(dim: usize, points: &[f64]) -> Result<()> {
    if dim == 0 || points.is_empty() || points.len() % dim != 0 {
        return Err(invalid("a point cloud needs at least one point of positive dimension"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(invalid("point coordinates must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Assignment,
    NetworkSimplex,
    Bottleneck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    #[serde(with = "crate::jsonfloat")]
    pub p: f64,
    pub value: f64,
    /// Support of the optimal coupling, sorted by `(i, j)`.
    pub plan: Vec<PlanEntry>,
    /// Optimality certificate: primal feasibility and dual feasibility of
    /// the final basis, checked over every pair.
    pub optimal: bool,
    pub method: Method,
    /// Total mass moved by rounding weights to the integer grid.
    pub mass_error_bound: f64,
}

impl TransportResult {
    /// `i,j,mass,distance` rows with a header.
    pub fn plan_csv(&self, a: &PointCloud, b: &PointCloud) -> String {
        let mut s = String::from("i,j,mass,distance\n");
        for e in &self.plan {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                e.i,
                e.j,
                fmt_f64(e.mass),
                fmt_f64(distance(a.point(e.i), b.point(e.j)))
            );
        }
        s
    }
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    Ok(())
}

/// Exact `W_p` for finite `p >= 1`.
pub fn wasserstein_p(a: &PointCloud, b: &PointCloud, p: f64) -> Result<TransportResult> {
    check_pair(a, b)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be finite and at least 1, got {p}")));
    }
    if a.m() == b.m() && a.is_uniform() && b.is_uniform() {
        let costs = cost::CostFn::new(&a.points, &b.points, a.dim, p);
        let n = a.m();
        let sol = assignment::solve(&costs, n);
        let w = 1.0 / n as f64;
        let mut plan: Vec<PlanEntry> =
            sol.col_of.iter().enumerate().map(|(i, &j)| PlanEntry { i, j, mass: w }).collect();
        plan.sort_by_key(|e| (e.i, e.j));
        let value = plan_value(&costs, &plan, p);
        return Ok(TransportResult {
            p,
            value,
            plan,
            optimal: sol.certified,
            method: Method::Assignment,
            mass_error_bound: 0.0,
        });
    }
    wasserstein_p_network_simplex(a, b, p)
}

/// Exact `W_p` by network simplex regardless of cloud shapes.
pub fn wasserstein_p_network_simplex(
    a: &PointCloud,
    b: &PointCloud,
    p: f64,
) -> Result<TransportResult> {
    check_pair(a, b)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be finite and at least 1, got {p}")));
    }
    let (supply, demand, unit, bound) = integer_masses(a, b);
    let costs = cost::CostFn::new(&a.points, &b.points, a.dim, p);
    let sol = network_simplex::solve(&costs, &supply, &demand);
    let plan: Vec<PlanEntry> = sol
        .flows
        .iter()
        .map(|&(i, j, f)| PlanEntry { i, j, mass: f as f64 * unit })
        .collect();
    let value = plan_value(&costs, &plan, p);
    Ok(TransportResult {
        p,
        value,
        plan,
        optimal: sol.certified,
        method: Method::NetworkSimplex,
        mass_error_bound: bound,
    })
}

fn plan_value(costs: &cost::CostFn<'_>, plan: &[PlanEntry], p: f64) -> f64 {
    let mut acc = Compensated::new();
    for e in plan {
        acc.add(e.mass * costs.cost(e.i, e.j));
    }
    costs.scale() * acc.value().max(0.0).powf(1.0 / p)
}

/// Integer supplies and demands with a common total, the mass of one unit,
/// and the rounding error bound.
fn integer_masses(a: &PointCloud, b: &PointCloud) -> (Vec<i64>, Vec<i64>, f64, f64) {
    let (m, n) = (a.m(), b.m());
    if a.is_uniform() && b.is_uniform() {
        let g = gcd(m, n);
        let total = (m / g) as f64 * n as f64;
        return (vec![(n / g) as i64; m], vec![(m / g) as i64; n], 1.0 / total, 0.0);
    }
    let round = |w: &[f64]| -> (Vec<i64>, f64) {
        let mut s: Vec<i64> = w.iter().map(|x| (x * WEIGHT_GRID).round() as i64).collect();
        let diff = WEIGHT_GRID as i64 - s.iter().sum::<i64>();
        let k = (0..s.len()).max_by_key(|&i| (s[i], std::cmp::Reverse(i))).unwrap();
        s[k] += diff;
        let err: f64 = s.iter().zip(w).map(|(&si, &wi)| (si as f64 / WEIGHT_GRID - wi).abs()).sum();
        (s, err)
    };
    let (s, ea) = round(&a.weights);
    let (t, eb) = round(&b.weights);
    (s, t, 1.0 / WEIGHT_GRID, ea + eb)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact `W_inf` between equal-size uniform clouds.
pub fn wasserstein_inf(a: &PointCloud, b: &PointCloud) -> Result<TransportResult> {
    check_pair(a, b)?;
    if a.m() != b.m() || !a.is_uniform() || !b.is_uniform() {
        return Err(invalid(format!(
            "W_inf needs equal-size uniform clouds, got sizes {} and {}; subsample the larger one",
            a.m(),
            b.m()
        )));
    }
    let n = a.m();
    let (value, col_of) = bottleneck::solve(&a.points, &b.points, a.dim, n);
    let w = 1.0 / n as f64;
    let plan = col_of.iter().enumerate().map(|(i, &j)| PlanEntry { i, j, mass: w }).collect();
    Ok(TransportResult {
        p: f64::INFINITY,
        value,
        plan,
        optimal: true,
        method: Method::Bottleneck,
        mass_error_bound: 0.0,
    })
}

/// `W_p` for `p` in `[1, inf]`.
pub fn wasserstein(a: &PointCloud, b: &PointCloud, p: f64) -> Result<TransportResult> {
    if p.is_infinite() && p > 0.0 {
        wasserstein_inf(a, b)
    } else {
        wasserstein_p(a, b, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampledBottleneck {
    pub median: f64,
    pub values: Vec<f64>,
}

/// `W_inf` between `a` and `reps` random size-`m(a)` subsamples of the
/// larger uniform cloud `b`; reports the median.
pub fn wasserstein_inf_subsampled(
    a: &PointCloud,
    b: &PointCloud,
    reps: usize,
    seed: u64,
) -> Result<SubsampledBottleneck> {
    check_pair(a, b)?;
    let (n, m) = (a.m(), b.m());
    if m < n || !a.is_uniform() || !b.is_uniform() {
        return Err(invalid("subsampling needs a uniform reference at least as large"));
    }
    if reps == 0 {
        return Err(invalid("need at least one subsample"));
    }
    let mut values = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut idx: Vec<usize> = (0..m).collect();
        for k in 0..n {
            let pick = rng.gen_range(k..m);
            idx.swap(k, pick);
        }
        let mut pts = Vec::with_capacity(n * a.dim);
        for &k in &idx[..n] {
            pts.extend_from_slice(b.point(k));
        }
        let sub = PointCloud::uniform(a.dim, pts)?;
        values.push(wasserstein_inf(a, &sub)?.value);
    }
    Ok(SubsampledBottleneck { median: median(&values), values })
}

/// `(sum_y w_y dist(y, supp a)^p)^{1/p}` over the points `y` of `b`
/// (`max_y` for `p = inf`). Every coupling moves the mass at `y` at least
/// `dist(y, supp a)`, so this never exceeds `W_p(a, b)`.
pub fn nearest_point_lower_bound(a: &PointCloud, b: &PointCloud, p: f64) -> Result<f64> {
    check_pair(a, b)?;
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    let dists = nearest_distances(a, b);
    if p.is_infinite() {
        return Ok(dists.iter().copied().fold(0.0, f64::max));
    }
    let scale = dists.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut acc = Compensated::new();
    for (d, w) in dists.iter().zip(&b.weights) {
        acc.add(w * (d / scale).powf(p));
    }
    Ok(scale * acc.value().powf(1.0 / p))
}

/// Distance from each point of `b` to the nearest point of `a`.
pub fn nearest_distances(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let m = a.m() as f64;
    let spread = {
        let diag = ParticleConfig { dim: a.dim, positions: a.points.clone(), time: 0.0 }.bbox_diagonal();
        if diag > 0.0 {
            diag
        } else {
            1.0
        }
    };
    let edge = spread * (4.0 / m).powf(1.0 / a.dim as f64);
    let grid = CellGrid::new(&a.points, a.dim, edge);
    (0..b.m())
        .map(|k| {
            let y = b.point(k);
            let mut r = grid.edge();
            loop {
                let mut best = f64::INFINITY;
                grid.scan(y, r, |_, d| best = best.min(d));
                if best.is_finite() {
                    return best;
                }
                r *= 2.0;
            }
        })
        .collect()
}
