//! Finite-N checks of the hypotheses and conclusions of the deterministic
//! convergence result, and the bootstrap monitor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_stats::{cutoff_sum, fmt_f64, distance_report, max_ball_count, ParticleConfig};
use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::neighbors::{k_nearest, pairs_within};
use crate::stats::fit_line;
use crate::transport::{
    nearest_point_lower_bound, wasserstein, wasserstein_inf_subsampled, PointCloud,
};

/// `delta_N = N^{-3/(2d) - eps}`.
pub fn select_delta(n: usize, d: usize, eps: f64) -> f64 {
    (n as f64).powf(-1.5 / d as f64 - eps)
}

/// Warnings when `(d, alpha, p)` lies outside the regime covered by the
/// convergence result. Empty when inside.
pub fn regime_warnings(d: usize, alpha: f64, p: f64) -> Vec<String> {
    let df = d as f64;
    let mut w = Vec::new();
    let alpha_max = ((2.0 * df - 3.0) / 3.0).min((df - 1.0) / 2.0);
    if !(alpha > 0.0 && alpha < alpha_max) {
        let cond = if d == 2 {
            "0<α<1/3 if d=2".to_string()
        } else {
            format!("0<α<min((2d-3)/3,(d-1)/2)={} for d={d}", short(alpha_max))
        };
        w.push(format!("alpha = {} is outside the convergence regime ({cond})", fmt_f64(alpha)));
    }
    let denom = 2.0 * df - 3.0 * (alpha + 1.0);
    if denom <= 0.0 {
        w.push(format!("no admissible p: 2d-3(α+1) = {} <= 0", short(denom)));
    } else {
        let thr = df * (alpha + 1.0) / denom;
        if !(p > thr) {
            w.push(format!(
                "p = {} does not exceed the threshold d(α+1)/(2d-3(α+1)) = {}",
                fmt_f64(p),
                short(thr)
            ));
        }
    }
    w
}

/// Six decimals with trailing zeros removed.
fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Cutoffs turning the asymptotic conditions into finite-N pass/fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// `d_ik / delta_N` must be at least this when `d_ij <= delta_N`.
    pub theta_sep: f64,
    /// Upper bound on `N^{-1} d_ij^{-1} d_ik^{-alpha}` when `d_ik < delta_N`.
    pub theta_small: f64,
    #[serde(with = "crate::jsonfloat")]
    pub conv_cutoff: f64,
    #[serde(with = "crate::jsonfloat")]
    pub wp_cutoff: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { theta_sep: 4.0, theta_small: 0.25, conv_cutoff: f64::INFINITY, wp_cutoff: f64::INFINITY }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_sep >= 1.0) {
            return Err(invalid(format!("theta_sep must be at least 1, got {}", self.theta_sep)));
        }
        if !(self.theta_small > 0.0 && self.theta_small <= 1.0) {
            return Err(invalid(format!("theta_small must lie in (0, 1], got {}", self.theta_small)));
        }
        if !(self.conv_cutoff > 0.0) || !(self.wp_cutoff > 0.0) {
            return Err(invalid("cutoffs must be positive"));
        }
        Ok(())
    }
}

/// How the distance between the particle cloud and the reference cloud is
/// obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WpMethod {
    /// Exact transport; `p = inf` against a larger reference uses the median
    /// over subsamples of the reference.
    #[default]
    Exact,
    /// The nearest-point lower bound, taken in both directions.
    LowerBound,
}

const SUBSAMPLES: usize = 5;

pub fn wp_estimate(a: &PointCloud, b: &PointCloud, p: f64, method: WpMethod, seed: u64) -> Result<f64> {
    match method {
        WpMethod::Exact if p.is_infinite() && a.m() != b.m() => {
            let (small, big) = if a.m() < b.m() { (a, b) } else { (b, a) };
            Ok(wasserstein_inf_subsampled(small, big, SUBSAMPLES, seed)?.median)
        }
        WpMethod::Exact => Ok(wasserstein(a, b, p)?.value),
        WpMethod::LowerBound => {
            Ok(nearest_point_lower_bound(a, b, p)?.max(nearest_point_lower_bound(b, a, p)?))
        }
    }
}

/// `(vol / M)^{1/d}` with `vol` the bounding-box volume of the cloud: the
/// spacing below which a size-`M` cloud cannot resolve a density.
pub fn reference_floor(cloud: &PointCloud) -> f64 {
    let d = cloud.dim;
    let mut vol = 1.0;
    for a in 0..d {
        let (lo, hi) = (0..cloud.m())
            .map(|i| cloud.point(i)[a])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        vol *= (hi - lo).max(0.0);
    }
    (vol / cloud.m() as f64).powf(1.0 / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    #[serde(with = "crate::jsonfloat")]
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WpCondition {
    pub pass: bool,
    #[serde(with = "crate::jsonfloat")]
    pub value: f64,
    #[serde(with = "crate::jsonfloat")]
    pub transport_term: f64,
    #[serde(with = "crate::jsonfloat")]
    pub close_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strong1 {
    pub pass: bool,
    /// Smallest `d_ik / delta_N` over qualifying triples; `inf` if none.
    #[serde(with = "crate::jsonfloat")]
    pub worst_ratio: f64,
    pub qualifying_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strong2 {
    pub pass: bool,
    /// Largest `N^{-1} d_ij^{-1} d_ik^{-alpha}`; 0 if no pair qualifies.
    #[serde(with = "crate::jsonfloat")]
    pub worst_value: f64,
    pub qualifying_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorbable {
    pub pass: bool,
    #[serde(with = "crate::jsonfloat")]
    pub lhs: f64,
    #[serde(with = "crate::jsonfloat")]
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p: f64,
    pub delta_n: f64,
    pub d_min: f64,
    #[serde(with = "crate::jsonfloat")]
    pub d_min1: f64,
    /// `delta_N <= d_min1(0)`; a hard requirement.
    pub delta_ok: bool,
    /// `rho_N(D_{delta_N})`.
    pub close_mass: f64,
    pub w_p0: f64,
    pub wp_method: WpMethod,
    /// Resolution floor of the reference cloud.
    pub reference_floor: f64,
    pub cond_conv: Check,
    pub cond_wp: WpCondition,
    pub cond_strong1: Strong1,
    pub cond_strong2: Strong2,
    pub cond_absorbable: Absorbable,
    pub thresholds: Thresholds,
    pub all_pass: bool,
}

/// `N^{-1} rho^{1/p} d_min^{-alpha}` with `rho^{1/inf} = [rho > 0]`.
fn penalty(n: usize, close_mass: f64, d_min: f64, alpha: f64, p: f64) -> f64 {
    let mass = if p.is_infinite() {
        if close_mass > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        close_mass.powf(1.0 / p)
    };
    if mass == 0.0 {
        return 0.0;
    }
    mass * d_min.powf(-alpha) / n as f64
}

/// Left side of the transport condition, split into its two terms.
pub fn wp_condition_terms(
    n: usize,
    d: usize,
    alpha: f64,
    p: f64,
    delta_n: f64,
    w_p: f64,
    close_mass: f64,
    d_min: f64,
) -> (f64, f64) {
    let nf = n as f64;
    let df = d as f64;
    let pre = 1.0 / (nf.powf((alpha + 1.0) / df) * delta_n.powf(alpha + 1.0));
    let e = df - alpha - 1.0;
    if p.is_infinite() {
        let close = if close_mass > 0.0 { (d_min.powf(-alpha) / nf).powf(e) } else { 0.0 };
        (pre * w_p.powf(e), pre * close)
    } else {
        let first = w_p.powf(e * p / (df + p));
        // (N^{-p} rho d_min^{-alpha p})^{e/(d+p)}, in logs so large p cannot underflow
        let close = if close_mass > 0.0 {
            (e / (df + p) * (close_mass.ln() - p * (nf.ln() + alpha * d_min.ln()))).exp()
        } else {
            0.0
        };
        (pre * first, pre * close)
    }
}

pub fn check_assumptions(
    config0: &ParticleConfig,
    reference: &PointCloud,
    kernel: &KernelSpec,
    delta_n: f64,
    p: f64,
    thresholds: &Thresholds,
    wp_method: WpMethod,
    seed: u64,
) -> Result<AssumptionReport> {
    thresholds.validate()?;
    if reference.dim != config0.dim {
        return Err(Error::DimensionMismatch { expected: config0.dim, got: reference.dim });
    }
    if kernel.dimension != config0.dim {
        return Err(Error::DimensionMismatch { expected: config0.dim, got: kernel.dimension });
    }
    if !(p >= 1.0) {
        return Err(invalid(format!("p must lie in [1, inf], got {p}")));
    }
    if !(delta_n > 0.0) {
        return Err(invalid("delta_N must be positive"));
    }
    let n = config0.n();
    let d = config0.dim;
    let alpha = kernel.alpha();
    let rep = distance_report(config0, delta_n)?;
    let cloud = PointCloud::from_config(config0);
    let w_p0 = wp_estimate(&cloud, reference, p, wp_method, seed)?;

    let cond_conv = Check { pass: w_p0 <= thresholds.conv_cutoff, value: w_p0 };
    let (transport_term, close_term) =
        wp_condition_terms(n, d, alpha, p, delta_n, w_p0, rep.close_mass, rep.d_min);
    let wp_value = transport_term + close_term;
    let cond_wp = WpCondition { pass: wp_value <= thresholds.wp_cutoff, value: wp_value, transport_term, close_term };

    let (cond_strong1, cond_strong2) = strong_conditions(config0, delta_n, alpha, thresholds);

    let lhs = penalty(n, rep.close_mass, rep.d_min, alpha, p);
    let cond_absorbable = Absorbable { pass: lhs <= w_p0, lhs, rhs: w_p0 };
    let delta_ok = delta_n <= rep.d_min1;
    let all_pass = delta_ok
        && cond_conv.pass
        && cond_wp.pass
        && cond_strong1.pass
        && cond_strong2.pass
        && cond_absorbable.pass;
    Ok(AssumptionReport {
        n,
        dim: d,
        alpha,
        p,
        delta_n,
        d_min: rep.d_min,
        d_min1: rep.d_min1,
        delta_ok,
        close_mass: rep.close_mass,
        w_p0,
        wp_method,
        reference_floor: reference_floor(reference),
        cond_conv,
        cond_wp,
        cond_strong1,
        cond_strong2,
        cond_absorbable,
        thresholds: *thresholds,
        all_pass,
    })
}

/// Both three-particle conditions. For a fixed pair only the nearest third
/// particle matters, so the two nearest neighbours of each particle suffice.
fn strong_conditions(config: &ParticleConfig, delta: f64, alpha: f64, th: &Thresholds) -> (Strong1, Strong2) {
    let n = config.n();
    let nn = if n >= 3 { k_nearest(&config.positions, config.dim, 2) } else { vec![vec![]; n] };
    // nearest particle to i other than `other`
    let third = |i: usize, other: usize| -> Option<f64> {
        nn[i].iter().find(|&&(_, j)| j != other).map(|&(d, _)| d)
    };
    let pairs = pairs_within(&config.positions, config.dim, delta);

    let mut worst_ratio = f64::INFINITY;
    let mut q1 = 0;
    let mut worst_value: f64 = 0.0;
    let mut q2 = 0;
    for &(a, b) in &pairs {
        let dab = config.dist(a, b);
        for (i, j) in [(a, b), (b, a)] {
            q1 += 1;
            if let Some(dik) = third(i, j) {
                worst_ratio = worst_ratio.min(dik / delta);
            }
            if dab < delta {
                // here (i, k) = (i, j) is the close pair, the third particle is i's next neighbour
                q2 += 1;
                if let Some(dij) = third(i, j) {
                    let v = dij.recip() * dab.powf(-alpha) / n as f64;
                    worst_value = worst_value.max(if v.is_nan() { f64::INFINITY } else { v });
                }
            }
        }
    }
    (
        Strong1 { pass: worst_ratio >= th.theta_sep, worst_ratio, qualifying_pairs: q1 },
        Strong2 { pass: worst_value <= th.theta_small, worst_value, qualifying_pairs: q2 },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConclusionSample {
    pub t: f64,
    pub w_p: f64,
    /// Smallest `d_ij(t) / d_ij(0)` over pairs.
    pub min_distance_ratio: f64,
    /// `K (W_p(0) + penalty) e^{C t}` with the envelope prefactor.
    pub bound: f64,
    /// `W_p(t) / (W_p(0) e^{C t})`.
    pub ratio_to_initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConclusionReport {
    pub n: usize,
    pub m: usize,
    #[serde(with = "crate::jsonfloat")]
    pub p: f64,
    pub delta_n: f64,
    pub fitted_c_dist: f64,
    pub fitted_c_wp: f64,
    /// Unclipped least-squares slope of `log W_p(t)`.
    pub wp_slope: f64,
    /// `K` from the least-squares intercept.
    pub prefactor: f64,
    /// Smallest `K` for which the fitted bound holds on every sample.
    pub envelope_prefactor: f64,
    pub penalty: f64,
    pub reference_floor: f64,
    pub sup_w_p: f64,
    pub sup_ratio: f64,
    pub samples: Vec<ConclusionSample>,
}

/// Largest `(1/t) log(d_ij(0) / d_ij(t))` over recorded `t > 0` and all
/// pairs, clipped at zero.
pub fn fitted_c_dist(traj: &Trajectory) -> f64 {
    let c0 = &traj.configs[0];
    let t0 = c0.time;
    let n = c0.n();
    traj.configs
        .iter()
        .skip(1)
        .map(|c| {
            let t = c.time - t0;
            let worst = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut w: f64 = 0.0;
                    for j in i + 1..n {
                        let r = (c0.dist(i, j) / c.dist(i, j)).ln();
                        w = w.max(r);
                    }
                    w
                })
                .reduce(|| 0.0, f64::max);
            worst / t
        })
        .fold(0.0, f64::max)
}

fn min_distance_ratio(c0: &ParticleConfig, c: &ParticleConfig) -> f64 {
    let n = c0.n();
    (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| c.dist(i, j) / c0.dist(i, j)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

pub fn check_conclusions(
    micro: &Trajectory,
    reference: &Trajectory,
    p: f64,
    delta_n: f64,
    wp_method: WpMethod,
    seed: u64,
) -> Result<ConclusionReport> {
    if micro.sample_times != reference.sample_times {
        return Err(Error::GridMismatch(format!(
            "{} micro samples vs {} reference samples",
            micro.sample_times.len(),
            reference.sample_times.len()
        )));
    }
    if micro.configs.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let c0 = &micro.configs[0];
    let n = c0.n();
    let m = reference.configs[0].n();
    if m < n {
        return Err(invalid(format!("reference cloud ({m}) smaller than the particle system ({n})")));
    }
    let w: Vec<f64> = micro
        .configs
        .iter()
        .zip(&reference.configs)
        .map(|(a, b)| wp_estimate(&PointCloud::from_config(a), &PointCloud::from_config(b), p, wp_method, seed))
        .collect::<Result<_>>()?;
    let rep = distance_report(c0, delta_n)?;
    let alpha = micro.kernel.alpha();
    let pen = penalty(n, rep.close_mass, rep.d_min, alpha, p);
    let t0 = micro.sample_times[0];
    let ts: Vec<f64> = micro.sample_times.iter().map(|t| t - t0).collect();
    let logs: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = if ts.len() >= 2 && logs.iter().all(|v| v.is_finite()) {
        let f = fit_line(&ts, &logs);
        (f.slope, f.intercept)
    } else {
        (0.0, w[0].ln())
    };
    let c_wp = slope.max(0.0);
    let base = w[0] + pen;
    let prefactor = intercept.exp() / base;
    // smallest K with W_p(t) <= K (W_p(0) + penalty) e^{C t} on every sample
    let envelope_prefactor = ts
        .iter()
        .zip(&w)
        .map(|(t, v)| v / (base * (c_wp * t).exp()))
        .fold(0.0, f64::max);
    let samples: Vec<ConclusionSample> = ts
        .iter()
        .enumerate()
        .map(|(k, &t)| ConclusionSample {
            t: micro.sample_times[k],
            w_p: w[k],
            min_distance_ratio: min_distance_ratio(c0, &micro.configs[k]),
            bound: envelope_prefactor * base * (c_wp * t).exp(),
            ratio_to_initial: w[k] / (w[0] * (c_wp * t).exp()),
        })
        .collect();
    let sup_ratio = samples.iter().map(|s| s.ratio_to_initial).fold(0.0, f64::max);
    Ok(ConclusionReport {
        n,
        m,
        p,
        delta_n,
        fitted_c_dist: fitted_c_dist(micro),
        fitted_c_wp: c_wp,
        wp_slope: slope,
        prefactor,
        envelope_prefactor,
        penalty: pen,
        reference_floor: reference_floor(&PointCloud::from_config(&reference.configs[0])),
        sup_w_p: w.iter().copied().fold(0.0, f64::max),
        sup_ratio,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSample {
    pub t: f64,
    pub delta_t: f64,
    pub s_over_n: f64,
    #[serde(with = "crate::jsonfloat")]
    pub d_min1: f64,
    /// `d_min1(t) < delta(t)`.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSeries {
    pub delta_n: f64,
    pub l1: f64,
    pub samples: Vec<BootstrapSample>,
    /// Smallest `L2` with `S_{alpha+1, delta(t)} <= N L2` on every sample.
    pub implied_l2: f64,
    pub any_violation: bool,
}

/// `delta(t) = delta_N e^{-2 L1 t} / 2` and the cut-off sums it controls.
pub fn bootstrap_monitor(traj: &Trajectory, delta_n: f64, l1: f64, alpha: f64) -> Result<BootstrapSeries> {
    if !(l1 >= 0.0) {
        return Err(invalid("L1 must be nonnegative"));
    }
    let t0 = traj.sample_times.first().copied().unwrap_or(0.0);
    let samples: Vec<BootstrapSample> = traj
        .configs
        .iter()
        .map(|c| {
            let delta_t = 0.5 * delta_n * (-2.0 * l1 * (c.time - t0)).exp();
            let s = cutoff_sum(c, alpha + 1.0, delta_t)?.max;
            let d_min1 = distance_report(c, delta_t)?.d_min1;
            Ok(BootstrapSample {
                t: c.time,
                delta_t,
                s_over_n: s / c.n() as f64,
                d_min1,
                violated: d_min1 < delta_t,
            })
        })
        .collect::<Result<_>>()?;
    let implied_l2 = samples.iter().map(|s| s.s_over_n).fold(0.0, f64::max);
    let any_violation = samples.iter().any(|s| s.violated);
    Ok(BootstrapSeries { delta_n, l1, samples, implied_l2, any_violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffBoundReport {
    pub lhs: f64,
    #[serde(with = "crate::jsonfloat")]
    pub rhs: f64,
    pub ratio: f64,
    /// `sup_i #{j : X_j in B_delta(X_i)}`.
    pub m_ball: usize,
    pub w_p: f64,
    #[serde(with = "crate::jsonfloat")]
    pub p: f64,
    pub beta: f64,
    pub delta: f64,
}

/// Right side of the cut-off sum bound with unit constant.
pub fn cutoff_bound_rhs(n: usize, d: usize, beta: f64, delta: f64, p: f64, rho_inf: f64, m_ball: usize, w_p: f64) -> f64 {
    let (nf, df, mf) = (n as f64, d as f64, m_ball as f64);
    let first = rho_inf.powf(beta / df);
    let core = mf.powf(beta / df) / (nf.powf(beta / df) * delta.powf(beta));
    if p.is_infinite() {
        return first + core * rho_inf.powf((df - beta) / df) * w_p.powf(df - beta);
    }
    let a = core * rho_inf.powf((df - beta) / df * p / (df + p));
    let b = (core * rho_inf.powf((df - beta) / df)).powf((beta + p) / (df + p));
    first + (a + b) * w_p.powf((df - beta) * p / (df + p))
}

#[allow(clippy::too_many_arguments)]
pub fn check_cutoff_bound(
    config: &ParticleConfig,
    reference: &PointCloud,
    beta: f64,
    delta: f64,
    p: f64,
    rho_inf: f64,
    wp_method: WpMethod,
    seed: u64,
) -> Result<CutoffBoundReport> {
    let d = config.dim;
    if !(beta > 0.0 && beta < d as f64) {
        return Err(invalid(format!("beta must lie in (0, {d}), got {beta}")));
    }
    if !(rho_inf > 0.0) {
        return Err(invalid("rho_inf must be positive"));
    }
    let n = config.n();
    let lhs = cutoff_sum(config, beta, delta)?.max / n as f64;
    let m_ball = max_ball_count(config, delta);
    let w_p = wp_estimate(&PointCloud::from_config(config), reference, p, wp_method, seed)?;
    let rhs = cutoff_bound_rhs(n, d, beta, delta, p, rho_inf, m_ball, w_p);
    Ok(CutoffBoundReport { lhs, rhs, ratio: lhs / rhs, m_ball, w_p, p, beta, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(rows: &[&[f64]]) -> ParticleConfig {
        ParticleConfig::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 0.0).unwrap()
    }

    #[test]
    fn regime_warning_cases() {
        assert!(regime_warnings(2, 0.2, f64::INFINITY).is_empty());
        assert!(regime_warnings(3, 0.8, 9.5).is_empty());
        let w = regime_warnings(3, 0.8, 8.0);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("= 9"), "{}", w[0]);
        let w = regime_warnings(2, 0.5, 8.0);
        assert!(w[0].contains("0<α<1/3 if d=2"));
        assert!(w[1].starts_with("no admissible p"));
    }

    #[test]
    fn select_delta_examples() {
        assert!((select_delta(10_000, 3, 0.01) - 1e4f64.powf(-0.51)).abs() < 1e-15);
        assert!((select_delta(10_000, 3, 0.01) - 9.12e-3).abs() < 1e-5);
        assert_eq!(select_delta(64, 3, 0.0), 0.125);
        assert_eq!(select_delta(16, 2, 0.0), 0.125);
        assert_eq!(select_delta(1, 2, 0.1), 1.0);
    }

    #[test]
    fn strong_conditions_examples() {
        let th = Thresholds::default();
        let far = cfg(&[&[0.0, 0.0], &[10.0, 0.0], &[0.0, 10.0]]);
        let (s1, s2) = strong_conditions(&far, 0.5, 0.5, &th);
        assert!(s1.pass && s2.pass);
        assert_eq!(s1.worst_ratio, f64::INFINITY);
        assert_eq!(s2.worst_value, 0.0);

        let dn = 0.1;
        let c = cfg(&[&[0.0, 0.0], &[dn / 2.0, 0.0], &[2.0 * dn, 0.0]]);
        let (s1, _) = strong_conditions(&c, dn, 0.5, &th);
        assert!(!s1.pass);
        // from particle 1 the third particle sits at 1.5 delta_N
        assert!((s1.worst_ratio - 1.5).abs() < 1e-12);
    }

    #[test]
    fn strong2_arithmetic() {
        // N = 1000 is emulated by the 1/N factor only through n(); build a
        // config with one close pair, one third particle and far filler.
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1e-3, 0.0], vec![0.0, 1e-2]];
        for k in 0..997 {
            rows.push(vec![10.0 + k as f64, 10.0]);
        }
        let c = ParticleConfig::from_rows(&rows, 0.0).unwrap();
        let th = Thresholds::default();
        let (_, s2) = strong_conditions(&c, 2e-3, 1.0, &th);
        // worst orientation: i = 0, k = 1, third at 1e-2: 1e-3 * 1e2 * 1e3
        assert!((s2.worst_value - 100.0).abs() < 1e-9, "{}", s2.worst_value);
        assert!(!s2.pass);
        assert_eq!(s2.qualifying_pairs, 2);
    }

    #[test]
    fn p_infinity_is_the_limit() {
        let (n, d, a, dn, w, cm, dm) = (1000, 3, 0.5, 0.01, 0.05, 0.01, 1e-3);
        let inf = wp_condition_terms(n, d, a, f64::INFINITY, dn, w, cm, dm);
        let big = wp_condition_terms(n, d, a, 1e6, dn, w, cm, dm);
        assert!(((inf.0 - big.0) / inf.0).abs() < 1e-4);
        assert!(((inf.1 - big.1) / inf.1).abs() < 1e-4);
    }

    #[test]
    fn cutoff_bound_hand_fixture() {
        let c = cfg(&[&[0.0, 0.0], &[0.1, 0.0], &[5.0, 0.0]]);
        let r = PointCloud::from_config(&c);
        let rep = check_cutoff_bound(&c, &r, 1.0, 0.5, 2.0, 1.0, WpMethod::Exact, 0).unwrap();
        assert!((rep.lhs - (0.2 + 1.0 / 4.9) / 3.0).abs() < 1e-15);
        assert_eq!(rep.m_ball, 2);
        assert_eq!(rep.w_p, 0.0);
        assert_eq!(rep.rhs, 1.0);
        let big = check_cutoff_bound(&c, &r, 1.0, 10.0, 2.0, 1.0, WpMethod::Exact, 0).unwrap();
        assert_eq!((big.lhs, big.ratio), (0.0, 0.0));
        assert!(check_cutoff_bound(&c, &r, 2.0, 0.5, 2.0, 1.0, WpMethod::Exact, 0).is_err());
    }

    #[test]
    fn assumptions_on_separated_points() {
        let c = cfg(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let r = PointCloud::from_config(&c);
        let k = KernelSpec::power_law(2, 0.3).unwrap();
        let rep = check_assumptions(&c, &r, &k, 0.5, 2.0, &Thresholds::default(), WpMethod::Exact, 0).unwrap();
        assert!(rep.delta_ok && rep.all_pass);
        assert_eq!(rep.w_p0, 0.0);
        assert_eq!(rep.close_mass, 0.0);
        assert_eq!(rep.cond_absorbable.lhs, 0.0);
        let bad = check_assumptions(&c, &r, &k, 2.0, 2.0, &Thresholds::default(), WpMethod::Exact, 0).unwrap();
        assert!(!bad.delta_ok && !bad.all_pass);
    }
}
