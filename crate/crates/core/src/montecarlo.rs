//! i.i.d. initial data from Lipschitz pushforwards of the uniform cube, and
//! Monte Carlo estimators for the probabilistic scaling statements.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_stats::{fmt_f64, ParticleConfig};
use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;
use crate::neighbors::{k_nearest, pairs_within};
use crate::stats::{fit_line, median, LineFit, Proportion};
use crate::transport::PointCloud;
use crate::verifier::{check_assumptions, regime_warnings, select_delta, wp_estimate, Thresholds, WpMethod};

#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily {
    UniformCube,
    /// `x -> A x + b`, `A` row-major.
    Affine { matrix: Vec<f64>, shift: Vec<f64> },
    /// `x_k -> x_k + a sin(2 pi x_{k+1})`, indices cyclic.
    SineWarp { amplitude: f64 },
}

/// Law of `Phi(U)` with `U` uniform on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityConfig", into = "DensityConfig")]
pub struct DensitySpec {
    pub family: DensityFamily,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub family: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

impl TryFrom<DensityConfig> for DensitySpec {
    type Error = crate::error::Error;

    fn try_from(c: DensityConfig) -> Result<Self> {
        let extra = |name: &str, present: bool| -> Result<()> {
            if present {
                Err(invalid(format!("field `{name}` does not apply to family `{}`", c.family)))
            } else {
                Ok(())
            }
        };
        match c.family.as_str() {
            "uniform-cube" => {
                extra("matrix", c.matrix.is_some())?;
                extra("shift", c.shift.is_some())?;
                extra("amplitude", c.amplitude.is_some())?;
                DensitySpec::uniform_cube(c.dim)
            }
            "affine" => {
                extra("amplitude", c.amplitude.is_some())?;
                let m = c.matrix.clone().ok_or_else(|| invalid("affine density needs `matrix`"))?;
                let s = c.shift.clone().unwrap_or_else(|| vec![0.0; c.dim]);
                DensitySpec::affine(c.dim, m, s)
            }
            "sine-warp" => {
                extra("matrix", c.matrix.is_some())?;
                extra("shift", c.shift.is_some())?;
                let a = c.amplitude.ok_or_else(|| invalid("sine-warp density needs `amplitude`"))?;
                DensitySpec::sine_warp(c.dim, a)
            }
            other => Err(invalid(format!(
                "unknown density family `{other}` (expected uniform-cube, affine, sine-warp)"
            ))),
        }
    }
}

impl From<DensitySpec> for DensityConfig {
    fn from(d: DensitySpec) -> Self {
        let mut c = DensityConfig { family: String::new(), dim: d.dim, matrix: None, shift: None, amplitude: None };
        match d.family {
            DensityFamily::UniformCube => c.family = "uniform-cube".into(),
            DensityFamily::Affine { matrix, shift } => {
                c.family = "affine".into();
                c.matrix = Some(matrix);
                c.shift = Some(shift);
            }
            DensityFamily::SineWarp { amplitude } => {
                c.family = "sine-warp".into();
                c.amplitude = Some(amplitude);
            }
        }
        c
    }
}

fn determinant(m: &[f64], d: usize) -> f64 {
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs())).unwrap();
        if a[piv * d + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..d {
                a.swap(piv * d + k, c * d + k);
            }
            det = -det;
        }
        let p = a[c * d + c];
        det *= p;
        for r in c + 1..d {
            let f = a[r * d + c] / p;
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
        }
    }
    det
}

/// Largest singular value by power iteration on `A^T A`.
fn operator_norm(m: &[f64], d: usize) -> f64 {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = (0..d).map(|r| (0..d).map(|c| m[r * d + c] * v[c]).sum()).collect();
        let w: Vec<f64> = (0..d).map(|c| (0..d).map(|r| m[r * d + c] * av[r]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-15 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

impl DensitySpec {
    pub fn uniform_cube(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(Self { family: DensityFamily::UniformCube, dim })
    }

    pub fn affine(dim: usize, matrix: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if matrix.len() != dim * dim || shift.len() != dim {
            return Err(invalid(format!("affine map needs a {dim}x{dim} matrix and a length-{dim} shift")));
        }
        if matrix.iter().chain(&shift).any(|v| !v.is_finite()) {
            return Err(invalid("affine map entries must be finite"));
        }
        if determinant(&matrix, dim) == 0.0 {
            return Err(invalid("affine matrix is singular"));
        }
        Ok(Self { family: DensityFamily::Affine { matrix, shift }, dim })
    }

    pub fn sine_warp(dim: usize, amplitude: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(amplitude >= 0.0 && amplitude < 1.0 / (2.0 * PI)) {
            return Err(invalid(format!("sine-warp amplitude must lie in [0, 1/(2 pi)), got {amplitude}")));
        }
        Ok(Self { family: DensityFamily::SineWarp { amplitude }, dim })
    }

    pub fn lipschitz_const(&self) -> f64 {
        match &self.family {
            DensityFamily::UniformCube => 1.0,
            DensityFamily::Affine { matrix, .. } => operator_norm(matrix, self.dim),
            DensityFamily::SineWarp { amplitude } => 1.0 + 2.0 * PI * amplitude,
        }
    }

    /// `||rho^0||_inf`.
    pub fn sup_density(&self) -> f64 {
        match &self.family {
            DensityFamily::UniformCube => 1.0,
            DensityFamily::Affine { matrix, .. } => 1.0 / determinant(matrix, self.dim).abs(),
            DensityFamily::SineWarp { amplitude } => (1.0 - 2.0 * PI * amplitude).powi(-(self.dim as i32)),
        }
    }

    /// Diameter of the support (an upper bound for the sine warp).
    pub fn diameter(&self) -> f64 {
        let d = self.dim;
        match &self.family {
            DensityFamily::UniformCube => (d as f64).sqrt(),
            DensityFamily::Affine { matrix, .. } => {
                // attained between opposite vertices: max |A s| over s in {-1, 1}^d
                (0..1usize << d)
                    .map(|mask| {
                        (0..d)
                            .map(|r| {
                                (0..d)
                                    .map(|c| if mask >> c & 1 == 1 { matrix[r * d + c] } else { -matrix[r * d + c] })
                                    .sum::<f64>()
                                    .powi(2)
                            })
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max)
                    / 2.0
                    * 2.0
            }
            DensityFamily::SineWarp { amplitude } => (d as f64).sqrt() * (1.0 + 2.0 * amplitude),
        }
    }

    pub fn map_into(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.family {
            DensityFamily::UniformCube => out.copy_from_slice(u),
            DensityFamily::Affine { matrix, shift } => {
                for r in 0..d {
                    out[r] = shift[r] + (0..d).map(|c| matrix[r * d + c] * u[c]).sum::<f64>();
                }
            }
            DensityFamily::SineWarp { amplitude } => {
                for k in 0..d {
                    out[k] = u[k] + amplitude * (2.0 * PI * u[(k + 1) % d]).sin();
                }
            }
        }
    }
}

/// `n` i.i.d. draws; identical `(density, n, seed)` give identical output.
pub fn sample_config(density: &DensitySpec, n: usize, seed: u64) -> Result<ParticleConfig> {
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let d = density.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = vec![0.0; n * d];
    let mut u = vec![0.0; d];
    for chunk in pos.chunks_exact_mut(d) {
        for v in u.iter_mut() {
            *v = rng.gen::<f64>();
        }
        density.map_into(&u, chunk);
    }
    ParticleConfig::new(d, pos, 0.0)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `r` in stream `stream` (e.g. the system size).
pub fn replica_seed(seed: u64, stream: u64, r: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)).wrapping_add(r))
}

/// Tag separating the reference-cloud stream from the particle stream.
pub const REFERENCE_STREAM: u64 = 0x7265_6665_7265_6e63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCRow {
    pub n: usize,
    /// What the row estimates, e.g. `L=2` or `strong2`.
    pub key: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proportion: Option<Proportion>,
    pub stats: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub value: f64,
    /// Event flags in the order of the report's `flag_names`.
    pub flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub estimator: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub replicas: usize,
    pub rows: Vec<MCRow>,
    pub fits: Vec<NamedFit>,
    pub warnings: Vec<String>,
    pub flag_names: Vec<String>,
    #[serde(skip)]
    pub raw: Vec<ReplicaRecord>,
}

impl MCReport {
    fn new(estimator: &str, seed: u64, replicas: usize) -> Self {
        Self {
            estimator: estimator.into(),
            params: BTreeMap::new(),
            seed,
            replicas,
            rows: vec![],
            fits: vec![],
            warnings: vec![],
            flag_names: vec![],
            raw: vec![],
        }
    }

    fn param(&mut self, k: &str, v: impl Serialize) {
        self.params.insert(k.into(), serde_json::to_value(v).expect("serialisable parameter"));
    }

    pub fn row(&self, n: usize, key: &str) -> Option<&MCRow> {
        self.rows.iter().find(|r| r.n == n && r.key == key)
    }

    /// `n,replica,seed,value,<flags>` with one line per replica.
    pub fn raw_csv(&self) -> String {
        let mut s = String::from("n,replica,seed,value");
        for f in &self.flag_names {
            s.push(',');
            s.push_str(f);
        }
        s.push('\n');
        for r in &self.raw {
            s.push_str(&format!("{},{},{},{}", r.n, r.replica, r.seed, fmt_f64(r.value)));
            for f in &r.flags {
                s.push_str(if *f { ",1" } else { ",0" });
            }
            s.push('\n');
        }
        s
    }
}

fn check_common(density: &DensitySpec, n_list: &[usize], replicas: usize) -> Result<()> {
    if n_list.is_empty() {
        return Err(invalid("empty list of system sizes"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < 3) {
        return Err(invalid(format!("system sizes must be at least 3, got {n}")));
    }
    if replicas == 0 {
        return Err(invalid("need at least one replica"));
    }
    let _ = density;
    Ok(())
}

/// Runs `f(config, replica_seed)` over `replicas` samples of size `n`,
/// in replica order.
fn per_replica<T, F>(density: &DensitySpec, n: usize, replicas: usize, seed: u64, f: F) -> Result<Vec<(u64, T)>>
where
    T: Send,
    F: Fn(&ParticleConfig, u64) -> Result<T> + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = replica_seed(seed, n as u64, r as u64);
            let c = sample_config(density, n, s)?;
            Ok((s, f(&c, s)?))
        })
        .collect()
}

/// Nearest and second-nearest neighbour distance of every particle.
fn nn12(c: &ParticleConfig) -> Vec<(f64, f64)> {
    k_nearest(&c.positions, c.dim, 2).into_iter().map(|l| (l[0].0, l[1].0)).collect()
}

/// `d_min` and `d_min,1` of a configuration with `N >= 3`.
pub fn dmin_pair(c: &ParticleConfig) -> (f64, f64) {
    nn12(c).iter().fold((f64::INFINITY, f64::INFINITY), |(a, b), &(x, y)| (a.min(x), b.min(y)))
}

fn tail_rows(
    rep: &mut MCReport,
    n: usize,
    ls: &[f64],
    seeds_values: &[(u64, f64)],
    threshold: impl Fn(f64) -> f64,
    scale: f64,
) {
    let values: Vec<f64> = seeds_values.iter().map(|v| v.1).collect();
    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
    for &l in ls {
        let th = threshold(l);
        let hits = values.iter().filter(|&&v| v <= th).count();
        let mut stats = BTreeMap::new();
        stats.insert("L".into(), l);
        stats.insert("threshold".into(), th);
        stats.insert("median_scaled".into(), median(&scaled));
        rep.rows.push(MCRow {
            n,
            key: format!("L={}", fmt_f64(l)),
            proportion: Some(Proportion::wilson(hits, values.len())),
            stats,
        });
    }
    for (r, &(s, v)) in seeds_values.iter().enumerate() {
        rep.raw.push(ReplicaRecord {
            n,
            replica: r,
            seed: s,
            value: v,
            flags: ls.iter().map(|&l| v <= threshold(l)).collect(),
        });
    }
}

/// `P(d_min <= L^{-1} N^{-2/d})` for each `L`; also the median of
/// `d_min N^{2/d}`.
pub fn estimate_dmin_tail(
    density: &DensitySpec,
    n_list: &[usize],
    ls: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    let d = density.dim as f64;
    let mut rep = MCReport::new("dmin-tail", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("n_list", n_list);
    rep.param("L", ls);
    rep.flag_names = ls.iter().map(|l| format!("below_L={}", fmt_f64(*l))).collect();
    for &n in n_list {
        let v = per_replica(density, n, replicas, seed, |c, _| Ok(dmin_pair(c).0))?;
        let nf = n as f64;
        tail_rows(&mut rep, n, ls, &v, |l| nf.powf(-2.0 / d) / l, nf.powf(2.0 / d));
    }
    Ok(rep)
}

/// `P(d_min,1 <= L^{-1} N^{-3/(2d)})` for each `L`; also the median of
/// `d_min,1 N^{3/(2d)}`.
pub fn estimate_dmin1_tail(
    density: &DensitySpec,
    n_list: &[usize],
    ls: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    let d = density.dim as f64;
    let mut rep = MCReport::new("dmin1-tail", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("n_list", n_list);
    rep.param("L", ls);
    rep.flag_names = ls.iter().map(|l| format!("below_L={}", fmt_f64(*l))).collect();
    for &n in n_list {
        let v = per_replica(density, n, replicas, seed, |c, _| Ok(dmin_pair(c).1))?;
        let nf = n as f64;
        tail_rows(&mut rep, n, ls, &v, |l| nf.powf(-1.5 / d) / l, nf.powf(1.5 / d));
    }
    Ok(rep)
}

/// Whether some particle has two distinct others at distances `<= l1` and
/// `<= l2`.
pub fn triple_proximity(c: &ParticleConfig, l1: f64, l2: f64) -> bool {
    let (lo, hi) = (l1.min(l2), l1.max(l2));
    nn12(c).iter().any(|&(a, b)| a <= lo && b <= hi)
}

/// `P(exists i, j != k : d_ij <= L1, d_ik <= L2)` for each `L1`.
pub fn estimate_triple_proximity(
    density: &DensitySpec,
    n_list: &[usize],
    l1_list: &[f64],
    l2: f64,
    replicas: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    let mut rep = MCReport::new("triple-proximity", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("n_list", n_list);
    rep.param("L1", l1_list);
    rep.param("L2", l2);
    rep.flag_names = l1_list.iter().map(|l| format!("event_L1={}", fmt_f64(*l))).collect();
    for &n in n_list {
        let v = per_replica(density, n, replicas, seed, |c, _| {
            let nn = nn12(c);
            Ok(l1_list
                .iter()
                .map(|&l1| {
                    let (lo, hi) = (l1.min(l2), l1.max(l2));
                    nn.iter().any(|&(a, b)| a <= lo && b <= hi)
                })
                .collect::<Vec<bool>>())
        })?;
        for (k, &l1) in l1_list.iter().enumerate() {
            let hits = v.iter().filter(|x| x.1[k]).count();
            let mut stats = BTreeMap::new();
            stats.insert("L1".into(), l1);
            stats.insert("L2".into(), l2);
            stats.insert("n3_l1d_l2d".into(), (n as f64).powi(3) * (l1 * l2).powi(density.dim as i32));
            rep.rows.push(MCRow {
                n,
                key: format!("L1={}", fmt_f64(l1)),
                proportion: Some(Proportion::wilson(hits, replicas)),
                stats,
            });
        }
        for (r, (s, flags)) in v.into_iter().enumerate() {
            rep.raw.push(ReplicaRecord { n, replica: r, seed: s, value: f64::NAN, flags });
        }
    }
    Ok(rep)
}

/// `exists i != j != k != i : d_ik < delta and N^{-1} d_ij^{-1} d_ik^{-beta} >= N^{-eps}`,
/// checking for each close pair only `i`'s nearest neighbours besides `k`.
pub fn triple_event(c: &ParticleConfig, beta: f64, eps: f64, delta: f64) -> bool {
    let n = c.n();
    if n < 3 || !(delta > 0.0) {
        return false;
    }
    let thresh = (n as f64).powf(1.0 - eps);
    let pairs = pairs_within(&c.positions, c.dim, delta);
    if pairs.is_empty() {
        return false;
    }
    let nn = k_nearest(&c.positions, c.dim, 3.min(n - 1));
    pairs.iter().any(|&(a, b)| {
        let dik = c.dist(a, b);
        dik < delta
            && [(a, b), (b, a)].iter().any(|&(i, k)| {
                nn[i].iter().find(|e| e.1 != k).is_some_and(|&(dij, _)| {
                    // d_ij^{-1} d_ik^{-beta} >= N^{1-eps}, written to survive zeros
                    dij * dik.powf(beta) * thresh <= 1.0
                })
            })
    })
}

/// The same event by enumerating all ordered triples.
pub fn triple_event_brute(c: &ParticleConfig, beta: f64, eps: f64, delta: f64) -> bool {
    let n = c.n();
    let thresh = (n as f64).powf(1.0 - eps);
    for i in 0..n {
        for k in 0..n {
            if k == i {
                continue;
            }
            let dik = c.dist(i, k);
            if !(dik < delta) {
                continue;
            }
            for j in 0..n {
                if j != i && j != k && c.dist(i, j) * dik.powf(beta) * thresh <= 1.0 {
                    return true;
                }
            }
        }
    }
    false
}

/// Shape of the three-particle bound without its constant.
pub fn triple_bound_shape(n: usize, d: usize, beta: f64, eps: f64, delta: f64) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    let tail = if beta < 1.0 {
        delta.powf(df * (1.0 - beta))
    } else if beta == 1.0 {
        nf.ln() + delta.ln().abs()
    } else {
        nf.powf((-2.0 / df - eps) * df * (1.0 - beta))
    };
    nf.powf(-df * eps) + nf.powf(3.0 - df * (1.0 - eps)) * tail
}

/// Cut-off radius as a function of `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRule {
    Fixed(f64),
    /// `delta = N^{-exponent}`.
    Power(f64),
}

impl DeltaRule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Power(e) => (n as f64).powf(-e),
        }
    }
}

pub fn estimate_triple_event(
    density: &DensitySpec,
    n_list: &[usize],
    beta: f64,
    eps: f64,
    delta: DeltaRule,
    replicas: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    if !(beta > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("need beta > 0 and eps in (0, 1)"));
    }
    let mut rep = MCReport::new("triple-event", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("n_list", n_list);
    rep.param("beta", beta);
    rep.param("eps", eps);
    rep.param("delta", delta);
    rep.flag_names = vec!["event".into()];
    let mut c_fit = None;
    for &n in n_list {
        let dl = delta.at(n);
        let v = per_replica(density, n, replicas, seed, |c, _| Ok(triple_event(c, beta, eps, dl)))?;
        let hits = v.iter().filter(|x| x.1).count();
        let prop = Proportion::wilson(hits, replicas);
        let shape = triple_bound_shape(n, density.dim, beta, eps, dl);
        // constant fitted at the smallest N
        let c = *c_fit.get_or_insert(prop.estimate / shape);
        let mut stats = BTreeMap::new();
        stats.insert("delta".into(), dl);
        stats.insert("bound_shape".into(), shape);
        stats.insert("fitted_bound".into(), c * shape);
        rep.rows.push(MCRow { n, key: "event".into(), proportion: Some(prop), stats });
        for (r, (s, e)) in v.into_iter().enumerate() {
            rep.raw.push(ReplicaRecord { n, replica: r, seed: s, value: f64::NAN, flags: vec![e] });
        }
    }
    Ok(rep)
}

/// `P(#{i : d_{i,nn} <= delta N^{-1/d}} >= 2 theta N)` and the mean fraction.
pub fn estimate_close_pairs_tail(
    density: &DensitySpec,
    n_list: &[usize],
    deltas: &[f64],
    theta: f64,
    replicas: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    let d = density.dim as f64;
    let mut rep = MCReport::new("close-pairs-tail", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("n_list", n_list);
    rep.param("delta", deltas);
    rep.param("theta", theta);
    rep.flag_names = deltas.iter().map(|x| format!("event_delta={}", fmt_f64(*x))).collect();
    for &n in n_list {
        let nf = n as f64;
        let v = per_replica(density, n, replicas, seed, |c, _| {
            let nn = k_nearest(&c.positions, c.dim, 1);
            Ok(deltas
                .iter()
                .map(|&dl| {
                    let r = dl * nf.powf(-1.0 / d);
                    nn.iter().filter(|l| l[0].0 <= r).count()
                })
                .collect::<Vec<usize>>())
        })?;
        for (k, &dl) in deltas.iter().enumerate() {
            let hits = v.iter().filter(|x| x.1[k] as f64 >= 2.0 * theta * nf).count();
            let mean = v.iter().map(|x| x.1[k] as f64 / nf).sum::<f64>() / replicas as f64;
            let mut stats = BTreeMap::new();
            stats.insert("delta".into(), dl);
            stats.insert("mean_fraction".into(), mean);
            rep.rows.push(MCRow {
                n,
                key: format!("delta={}", fmt_f64(dl)),
                proportion: Some(Proportion::wilson(hits, replicas)),
                stats,
            });
        }
        for (r, (s, counts)) in v.into_iter().enumerate() {
            rep.raw.push(ReplicaRecord {
                n,
                replica: r,
                seed: s,
                value: counts[0] as f64 / nf,
                flags: counts.iter().map(|&c| c as f64 >= 2.0 * theta * nf).collect(),
            });
        }
    }
    Ok(rep)
}

/// Median `W_p(rho_N, reference)` per `N` with a reference cloud of
/// `reference_factor * N` points, and the slope of `log median` vs `log N`.
pub fn wasserstein_scaling_study(
    density: &DensitySpec,
    p: f64,
    n_list: &[usize],
    replicas: usize,
    reference_factor: usize,
    method: WpMethod,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    if reference_factor == 0 {
        return Err(invalid("reference_factor must be positive"));
    }
    let mut rep = MCReport::new("wasserstein-scaling", seed, replicas);
    rep.param("dim", density.dim);
    rep.param("p", if p.is_infinite() { serde_json::json!("inf") } else { serde_json::json!(p) });
    rep.param("n_list", n_list);
    rep.param("reference_factor", reference_factor);
    rep.param("method", method);
    let d = density.dim as f64;
    let (mut xs, mut ys) = (vec![], vec![]);
    for &n in n_list {
        let m = reference_factor * n;
        let v = per_replica(density, n, replicas, seed, |c, s| {
            let reference = sample_config(density, m, replica_seed(s, REFERENCE_STREAM, 0))?;
            wp_estimate(&PointCloud::from_config(c), &PointCloud::from_config(&reference), p, method, s)
        })?;
        let vals: Vec<f64> = v.iter().map(|x| x.1).collect();
        let med = median(&vals);
        let mut stats = BTreeMap::new();
        stats.insert("median".into(), med);
        stats.insert("median_times_n_1_over_d".into(), med * (n as f64).powf(1.0 / d));
        stats.insert("min".into(), vals.iter().copied().fold(f64::INFINITY, f64::min));
        stats.insert("max".into(), vals.iter().copied().fold(0.0, f64::max));
        rep.rows.push(MCRow { n, key: "W_p".into(), proportion: None, stats });
        xs.push((n as f64).ln());
        ys.push(med.ln());
        for (r, (s, w)) in v.into_iter().enumerate() {
            rep.raw.push(ReplicaRecord { n, replica: r, seed: s, value: w, flags: vec![] });
        }
    }
    rep.fits.push(NamedFit { name: "log_median_vs_log_n".into(), fit: fit_line(&xs, &ys) });
    Ok(rep)
}

pub const CONDITIONS: [&str; 7] = ["delta_ok", "conv", "wp", "strong1", "strong2", "absorbable", "all"];

/// Fraction of i.i.d. configurations meeting every hypothesis with
/// `delta_N = N^{-3/(2d) - eps}`, with the per-condition breakdown.
#[allow(clippy::too_many_arguments)]
pub fn assumptions_probability(
    density: &DensitySpec,
    kernel: &KernelSpec,
    p: f64,
    eps: f64,
    n_list: &[usize],
    replicas: usize,
    thresholds: &Thresholds,
    method: WpMethod,
    reference_factor: usize,
    seed: u64,
) -> Result<MCReport> {
    check_common(density, n_list, replicas)?;
    if kernel.dimension != density.dim {
        return Err(invalid("kernel and density dimensions differ"));
    }
    if reference_factor == 0 {
        return Err(invalid("reference_factor must be positive"));
    }
    thresholds.validate()?;
    let mut rep = MCReport::new("assumptions-probability", seed, replicas);
    rep.warnings = regime_warnings(density.dim, kernel.alpha(), p);
    rep.param("dim", density.dim);
    rep.param("alpha", kernel.alpha());
    rep.param("p", if p.is_infinite() { serde_json::json!("inf") } else { serde_json::json!(p) });
    rep.param("eps", eps);
    rep.param("n_list", n_list);
    rep.param("thresholds", thresholds);
    rep.param("method", method);
    rep.param("reference_factor", reference_factor);
    rep.flag_names = CONDITIONS.iter().map(|s| s.to_string()).collect();
    for &n in n_list {
        let delta_n = select_delta(n, density.dim, eps);
        let v = per_replica(density, n, replicas, seed, |c, s| {
            let reference = sample_config(density, reference_factor * n, replica_seed(s, REFERENCE_STREAM, 0))?;
            let r = check_assumptions(c, &PointCloud::from_config(&reference), kernel, delta_n, p, thresholds, method, s)?;
            Ok((
                r.cond_strong2.worst_value,
                [
                    r.delta_ok,
                    r.cond_conv.pass,
                    r.cond_wp.pass,
                    r.cond_strong1.pass,
                    r.cond_strong2.pass,
                    r.cond_absorbable.pass,
                    r.all_pass,
                ],
            ))
        })?;
        for (k, name) in CONDITIONS.iter().enumerate() {
            let hits = v.iter().filter(|x| x.1 .1[k]).count();
            let mut stats = BTreeMap::new();
            stats.insert("delta_n".into(), delta_n);
            rep.rows.push(MCRow { n, key: (*name).into(), proportion: Some(Proportion::wilson(hits, replicas)), stats });
        }
        for (r, (s, (worst, flags))) in v.into_iter().enumerate() {
            rep.raw.push(ReplicaRecord { n, replica: r, seed: s, value: worst, flags: flags.to_vec() });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities() {
        let u = DensitySpec::uniform_cube(3).unwrap();
        let c = sample_config(&u, 500, 1).unwrap();
        assert!(c.positions.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(c, sample_config(&u, 500, 1).unwrap());
        assert_ne!(c, sample_config(&u, 500, 2).unwrap());

        let a = DensitySpec::affine(2, vec![2.0, 0.0, 0.0, 2.0], vec![1.0, -1.0]).unwrap();
        let c = sample_config(&a, 500, 1).unwrap();
        assert!(c.positions.chunks(2).all(|x| (1.0..=3.0).contains(&x[0]) && (-1.0..=1.0).contains(&x[1])));
        assert!((a.lipschitz_const() - 2.0).abs() < 1e-12);
        assert!((a.sup_density() - 0.25).abs() < 1e-15);
        assert!((a.diameter() - 8f64.sqrt()).abs() < 1e-12);

        let s = DensitySpec::sine_warp(2, 0.1).unwrap();
        assert!((s.lipschitz_const() - (1.0 + 0.2 * PI)).abs() < 1e-15);
        assert!((s.sup_density() - (1.0 - 0.2 * PI).powi(-2)).abs() < 1e-12);
        assert!(DensitySpec::sine_warp(2, 0.2).is_err());
        assert!(DensitySpec::affine(2, vec![1.0, 2.0, 2.0, 4.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn density_serde_round_trip() {
        for d in [
            DensitySpec::uniform_cube(2).unwrap(),
            DensitySpec::affine(2, vec![1.0, 0.5, 0.0, 1.0], vec![0.0, 1.0]).unwrap(),
            DensitySpec::sine_warp(3, 0.05).unwrap(),
        ] {
            let j = serde_json::to_string(&d).unwrap();
            assert_eq!(serde_json::from_str::<DensitySpec>(&j).unwrap(), d);
        }
        let bad = r#"{"family":"uniform-cube","dim":2,"amplitude":0.1}"#;
        assert!(serde_json::from_str::<DensitySpec>(bad).is_err());
        let typo = r#"{"family":"uniform-cube","dimension":2}"#;
        assert!(serde_json::from_str::<DensitySpec>(typo).is_err());
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let mut s: Vec<u64> = (0..1000).map(|r| replica_seed(7, 100, r)).collect();
        s.extend((0..1000).map(|r| replica_seed(7, 101, r)));
        let len = s.len();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), len);
    }

    #[test]
    fn tail_limits() {
        let u = DensitySpec::uniform_cube(2).unwrap();
        let r = estimate_dmin_tail(&u, &[50], &[1e-6, 1e9], 30, 3).unwrap();
        assert_eq!(r.row(50, "L=1e-6").unwrap().proportion.unwrap().estimate, 1.0);
        assert_eq!(r.row(50, "L=1000000000.0").unwrap().proportion.unwrap().estimate, 0.0);
        let r = estimate_dmin1_tail(&u, &[50], &[1e-6, 1e9], 30, 3).unwrap();
        assert_eq!(r.rows[0].proportion.unwrap().estimate, 1.0);
        assert_eq!(r.rows[1].proportion.unwrap().estimate, 0.0);
        assert_eq!(r.raw.len(), 30);
    }

    #[test]
    fn triple_event_limits() {
        let u = DensitySpec::uniform_cube(2).unwrap();
        let c = sample_config(&u, 100, 5).unwrap();
        assert!(!triple_event(&c, 0.5, 0.5, 0.0));
        assert!(triple_event(&c, 0.1, 0.99, 2.0));
        assert!(triple_event_brute(&c, 0.1, 0.99, 2.0));
    }

    #[test]
    fn close_pairs_limits() {
        let u = DensitySpec::uniform_cube(2).unwrap();
        let r = estimate_close_pairs_tail(&u, &[200], &[1e-9, 0.5], 0.6, 40, 1).unwrap();
        assert_eq!(r.rows[0].proportion.unwrap().estimate, 0.0);
        // theta >= 1/2 needs more than N particles
        assert_eq!(r.rows[1].proportion.unwrap().estimate, 0.0);
        assert!(r.rows[1].stats["mean_fraction"] > 0.0);
    }

    #[test]
    fn lax_thresholds_pass_everything_but_delta() {
        let u = DensitySpec::uniform_cube(2).unwrap();
        let k = KernelSpec::power_law(2, 0.2).unwrap();
        let lax = Thresholds { theta_sep: 1.0, theta_small: 1.0, ..Default::default() };
        let r = assumptions_probability(&u, &k, 2.0, 0.02, &[100], 20, &lax, WpMethod::LowerBound, 4, 9).unwrap();
        assert_eq!(r.row(100, "conv").unwrap().proportion.unwrap().estimate, 1.0);
        assert_eq!(r.row(100, "wp").unwrap().proportion.unwrap().estimate, 1.0);
        assert_eq!(r.raw.len(), 20);
    }
}
