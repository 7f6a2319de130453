//! Direct-summation integration of `dX_i/dt = (1/N) sum_{j != i} K(X_i - X_j)`
//! and the mollified blob solver used as the mean-field reference.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_stats::{cutoff_sum, distance_report, fmt_f64, ParticleConfig};
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, Orientation};
use crate::neighbors::k_nearest;
use crate::summation::Compensated;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Heun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControls {
    pub scheme: Scheme,
    pub dt_max: f64,
    /// Fraction of the closest distance a pair may close per step.
    pub eta: f64,
    /// Abort when `d_min` falls to this value (singular kernels only).
    pub d_floor: f64,
    pub record_every: f64,
    pub max_steps: usize,
    /// When set, every sample also records `S_{alpha+1, delta}` with this
    /// `delta` (an `O(N^2)` pass).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics_delta: Option<f64>,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt_max: 0.01,
            eta: 0.1,
            d_floor: 0.0,
            record_every: 0.1,
            max_steps: 10_000_000,
            diagnostics_delta: None,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(invalid(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.d_floor >= 0.0) {
            return Err(invalid("d_floor must be nonnegative"));
        }
        if !(self.record_every > 0.0) {
            return Err(invalid("record_every must be positive"));
        }
        if let Some(d) = self.diagnostics_delta {
            if !(d >= 0.0) {
                return Err(invalid("diagnostics_delta must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    pub t: f64,
    pub d_min: f64,
    #[serde(with = "crate::jsonfloat")]
    pub d_min1: f64,
    pub close_mass: f64,
    /// `S_{alpha+1, delta}`; NaN when not requested.
    #[serde(with = "crate::jsonfloat")]
    pub s_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kernel: KernelSpec,
    /// `C_K` used by the step rule.
    pub c_k: f64,
    pub controls: IntegratorControls,
    pub seed: Option<u64>,
    pub sample_times: Vec<f64>,
    pub configs: Vec<ParticleConfig>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub step_log: Vec<f64>,
}

/// Integration stopped early; `trajectory` holds the samples recorded so far.
#[derive(Debug, Clone)]
pub struct SimulationFailure {
    pub error: Error,
    pub trajectory: Trajectory,
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} samples)", self.error, self.trajectory.sample_times.len())
    }
}

impl std::error::Error for SimulationFailure {}

/// `K(-x) = sign * K(x)` for every `x`, when such a sign exists.
fn parity(kernel: &KernelSpec) -> Option<f64> {
    match &kernel.family {
        KernelFamily::PowerLaw { .. } => Some(-1.0),
        KernelFamily::OseenGravity { .. } => Some(1.0),
        KernelFamily::Mollified { base, .. } | KernelFamily::Scaled { base, .. } => parity(base),
        KernelFamily::Zero => Some(-1.0),
    }
}

/// Number of particles per tile in the pair sweep.
fn tile_size(n: usize) -> usize {
    256usize.max(n.div_ceil(64))
}

/// Velocities `v_i = (1/N) sum_{j != i} K(X_i - X_j)`.
///
/// Pairs are swept tile by tile; every tile pair is evaluated once and,
/// for kernels of definite parity, contributes to both tiles. Each partial
/// sum has a fixed owner and fixed order, so the result does not depend on
/// the number of worker threads.
pub fn rhs(config: &ParticleConfig, kernel: &KernelSpec) -> Result<Vec<f64>> {
    if kernel.dimension != config.dim {
        return Err(Error::DimensionMismatch { expected: kernel.dimension, got: config.dim });
    }
    rhs_raw(&config.positions, config.dim, kernel)
}

/// `c * x / max(|x|, eps)^{alpha+1}`: a repulsive power law, possibly
/// scaled and mollified, evaluated without going through the family tree.
#[derive(Clone, Copy)]
struct Repulsive {
    q: f64,
    c: f64,
    eps2: f64,
    inner: f64,
}

impl Repulsive {
    fn of(kernel: &KernelSpec) -> Option<Self> {
        fn walk(k: &KernelSpec) -> Option<(f64, f64, f64)> {
            match &k.family {
                KernelFamily::PowerLaw { alpha, orientation: Orientation::Repulsive } => Some((*alpha, 1.0, 0.0)),
                KernelFamily::Scaled { base, c } => walk(base).map(|(a, s, e)| (a, s * c, e)),
                KernelFamily::Mollified { base, epsilon } => walk(base).map(|(a, s, e)| (a, s, e.max(*epsilon))),
                _ => None,
            }
        }
        let (alpha, c, eps) = walk(kernel)?;
        Some(Self { q: -0.5 * (alpha + 1.0), c, eps2: eps * eps, inner: c * eps.powf(-(alpha + 1.0)) })
    }

    #[inline(always)]
    fn factor(&self, r2: f64) -> f64 {
        if r2 < self.eps2 {
            self.inner
        } else {
            self.c * r2.powf(self.q)
        }
    }
}

fn rhs_raw(pos: &[f64], dim: usize, kernel: &KernelSpec) -> Result<Vec<f64>> {
    let n = pos.len() / dim;
    if kernel.is_zero() {
        return Ok(vec![0.0; n * dim]);
    }
    macro_rules! dispatch {
        ($($d:literal)*) => {
            match dim {
                $($d => {
                    let p: Vec<[f64; $d]> = pos.chunks_exact($d).map(|c| c.try_into().unwrap()).collect();
                    let v = match Repulsive::of(kernel) {
                        Some(r) => sweep::<$d, _>(&p, kernel, |x: &[f64; $d], r2| {
                            let f = r.factor(r2);
                            x.map(|v| v * f)
                        })?,
                        None => sweep::<$d, _>(&p, kernel, |x: &[f64; $d], _| {
                            let mut k = [0.0; $d];
                            kernel.eval_into(x, &mut k);
                            k
                        })?,
                    };
                    Ok(v.into_iter().flatten().collect())
                })*
                _ => Err(invalid(format!("force evaluation supports d <= 8, got {dim}"))),
            }
        };
    }
    dispatch!(1 2 3 4 5 6 7 8)
}

/// Tiled pair sweep. `part[I][J]` holds the compensated sums over tile `J`
/// for the particles of tile `I`; tile pairs with `J > I` also fill
/// `part[J][I]` when the kernel has a parity.
fn sweep<const D: usize, F>(pos: &[[f64; D]], kernel: &KernelSpec, eval: F) -> Result<Vec<[f64; D]>>
where
    F: Fn(&[f64; D], f64) -> [f64; D] + Sync,
{
    let n = pos.len();
    let singular = kernel.is_singular();
    let sign = parity(kernel);
    let b = tile_size(n);
    let tiles = n.div_ceil(b);
    let range = |t: usize| t * b..((t + 1) * b).min(n);

    type Part<const D: usize> = Vec<[Compensated; D]>;
    let rows: Vec<Result<Vec<(usize, Part<D>, Option<Part<D>>)>>> = (0..tiles)
        .into_par_iter()
        .map(|ti| {
            let mut out = Vec::new();
            let first = if sign.is_some() { ti } else { 0 };
            for tj in first..tiles {
                let ri = range(ti);
                let rj = range(tj);
                let mut row = vec![[Compensated::new(); D]; ri.len()];
                let mut col = match sign {
                    Some(_) if tj != ti => Some(vec![[Compensated::new(); D]; rj.len()]),
                    _ => None,
                };
                for i in ri.clone() {
                    let xi = &pos[i];
                    let li = i - ri.start;
                    let j_lo = if sign.is_some() && tj == ti { i + 1 } else { rj.start };
                    for j in j_lo..rj.end {
                        if j == i {
                            continue;
                        }
                        let xj = &pos[j];
                        let mut x = [0.0; D];
                        let mut r2 = 0.0;
                        for a in 0..D {
                            x[a] = xi[a] - xj[a];
                            r2 += x[a] * x[a];
                        }
                        if r2 == 0.0 {
                            if singular {
                                return Err(Error::SingularConfiguration { i: i.min(j), j: i.max(j) });
                            }
                            continue;
                        }
                        let k = eval(&x, r2);
                        for a in 0..D {
                            row[li][a].add(k[a]);
                        }
                        if let Some(s) = sign {
                            let lj = j - rj.start;
                            // on the diagonal tile j > i lives in row storage too
                            let target = match col.as_mut() {
                                Some(c) => &mut c[lj],
                                None => &mut row[lj],
                            };
                            for a in 0..D {
                                target[a].add(s * k[a]);
                            }
                        }
                    }
                }
                out.push((tj, row, col));
            }
            Ok(out)
        })
        .collect();

    let mut part: Vec<Vec<Option<Part<D>>>> = vec![vec![None; tiles]; tiles];
    for (ti, r) in rows.into_iter().enumerate() {
        for (tj, row, col) in r? {
            part[ti][tj] = Some(row);
            if let Some(col) = col {
                part[tj][ti] = Some(col);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut v = vec![[0.0; D]; n];
    for ti in 0..tiles {
        let ri = range(ti);
        for li in 0..ri.len() {
            for a in 0..D {
                let mut acc = Compensated::new();
                for p in part[ti].iter().flatten() {
                    acc.add(p[li][a].value());
                }
                v[ri.start + li][a] = acc.value() * inv_n;
            }
        }
    }
    Ok(v)
}

/// `C_K` for the step rule: the kernel's hint, else an estimate on the
/// shell `[d_min, diameter]` of `config`.
pub fn step_constant(config: &ParticleConfig, kernel: &KernelSpec) -> f64 {
    if let Some(c) = kernel.c_k_hint() {
        return c;
    }
    let d_min = min_distance(config);
    let diam = config.bbox_diagonal();
    let lo = if d_min > 0.0 { d_min } else { diam * 1e-3 };
    kernel.c_k_or_estimate(lo.max(f64::MIN_POSITIVE), diam.max(lo))
}

fn min_distance(config: &ParticleConfig) -> f64 {
    k_nearest(&config.positions, config.dim, 1)
        .iter()
        .map(|l| l.first().map_or(f64::INFINITY, |p| p.0))
        .fold(f64::INFINITY, f64::min)
}

/// `min(dt_max, eta N d^{alpha+1} / (2 C_K))` with `d = max(d_min, core radius)`.
pub fn adaptive_dt(
    config: &ParticleConfig,
    kernel: &KernelSpec,
    controls: &IntegratorControls,
) -> Result<f64> {
    let c_k = step_constant(config, kernel);
    adaptive_dt_with(config, kernel, controls, c_k, min_distance(config))
}

fn adaptive_dt_with(
    config: &ParticleConfig,
    kernel: &KernelSpec,
    controls: &IntegratorControls,
    c_k: f64,
    d_min: f64,
) -> Result<f64> {
    if kernel.is_singular() && d_min <= controls.d_floor {
        return Err(Error::BlowUp { t: config.time, d_min, floor: controls.d_floor });
    }
    if kernel.is_zero() || c_k <= 0.0 || d_min.is_infinite() {
        return Ok(controls.dt_max);
    }
    let d = d_min.max(kernel.core_radius());
    let n = config.n() as f64;
    let dt = controls.eta * n * d.powf(kernel.alpha() + 1.0) / (2.0 * c_k);
    Ok(dt.min(controls.dt_max))
}

fn diagnostics(
    config: &ParticleConfig,
    kernel: &KernelSpec,
    controls: &IntegratorControls,
) -> Result<SampleDiagnostics> {
    let delta = controls.diagnostics_delta.unwrap_or(0.0);
    let r = distance_report(config, delta)?;
    let s_value = match controls.diagnostics_delta {
        Some(d) => cutoff_sum(config, kernel.alpha() + 1.0, d)?.max,
        None => f64::NAN,
    };
    Ok(SampleDiagnostics {
        t: config.time,
        d_min: r.d_min,
        d_min1: r.d_min1,
        close_mass: r.close_mass,
        s_value,
    })
}

fn step(pos: &[f64], dim: usize, kernel: &KernelSpec, dt: f64, scheme: Scheme) -> Result<Vec<f64>> {
    let axpy = |x: &[f64], h: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    match scheme {
        Scheme::Rk4 => {
            let k1 = rhs_raw(pos, dim, kernel)?;
            let k2 = rhs_raw(&axpy(pos, 0.5 * dt, &k1), dim, kernel)?;
            let k3 = rhs_raw(&axpy(pos, 0.5 * dt, &k2), dim, kernel)?;
            let k4 = rhs_raw(&axpy(pos, dt, &k3), dim, kernel)?;
            Ok((0..pos.len())
                .map(|e| pos[e] + dt / 6.0 * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]))
                .collect())
        }
        Scheme::Heun => {
            let k1 = rhs_raw(pos, dim, kernel)?;
            let k2 = rhs_raw(&axpy(pos, dt, &k1), dim, kernel)?;
            Ok((0..pos.len()).map(|e| pos[e] + 0.5 * dt * (k1[e] + k2[e])).collect())
        }
    }
}

/// Integrates to `t_end`, recording at every multiple of `record_every`
/// and at `t_end`.
pub fn simulate(
    config0: &ParticleConfig,
    kernel: &KernelSpec,
    t_end: f64,
    controls: &IntegratorControls,
) -> std::result::Result<Trajectory, Box<SimulationFailure>> {
    simulate_seeded(config0, kernel, t_end, controls, None)
}

pub fn simulate_seeded(
    config0: &ParticleConfig,
    kernel: &KernelSpec,
    t_end: f64,
    controls: &IntegratorControls,
    seed: Option<u64>,
) -> std::result::Result<Trajectory, Box<SimulationFailure>> {
    let mut traj = Trajectory {
        kernel: kernel.clone(),
        c_k: f64::NAN,
        controls: controls.clone(),
        seed,
        sample_times: Vec::new(),
        configs: Vec::new(),
        diagnostics: Vec::new(),
        step_log: Vec::new(),
    };
    match run(config0, kernel, t_end, controls, &mut traj) {
        Ok(()) => Ok(traj),
        Err(error) => Err(Box::new(SimulationFailure { error, trajectory: traj })),
    }
}

fn run(
    config0: &ParticleConfig,
    kernel: &KernelSpec,
    t_end: f64,
    controls: &IntegratorControls,
    traj: &mut Trajectory,
) -> Result<()> {
    controls.validate()?;
    if kernel.dimension != config0.dim {
        return Err(Error::DimensionMismatch { expected: kernel.dimension, got: config0.dim });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("final time must be positive, got {t_end}")));
    }
    if config0.n() < 2 {
        return Err(invalid("need at least two particles"));
    }
    let dim = config0.dim;
    let c_k = step_constant(config0, kernel);
    traj.c_k = c_k;

    let mut cur = config0.clone();
    let t0 = cur.time;
    let record = |traj: &mut Trajectory, c: &ParticleConfig| -> Result<()> {
        traj.diagnostics.push(diagnostics(c, kernel, controls)?);
        traj.sample_times.push(c.time);
        traj.configs.push(c.clone());
        Ok(())
    };
    record(traj, &cur)?;
    let t_final = t0 + t_end;
    let mut k_next = 1u64;
    let mut steps = 0usize;
    loop {
        let target = (t0 + k_next as f64 * controls.record_every).min(t_final);
        let d_min = min_distance(&cur);
        let dt = adaptive_dt_with(&cur, kernel, controls, c_k, d_min)?;
        let (dt, hit) = if target - cur.time <= dt * (1.0 + 1e-9) { (target - cur.time, true) } else { (dt, false) };
        let next = step(&cur.positions, dim, kernel, dt, controls.scheme)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { t: cur.time, d_min, floor: controls.d_floor });
        }
        cur.positions = next;
        cur.time = if hit { target } else { cur.time + dt };
        traj.step_log.push(dt);
        steps += 1;
        if hit {
            record(traj, &cur)?;
            if target >= t_final {
                return Ok(());
            }
            k_next += 1;
        }
        if steps >= controls.max_steps {
            return Err(invalid(format!("step budget of {} exhausted at t = {}", controls.max_steps, cur.time)));
        }
    }
}

/// Separation of a repulsive power-law pair: `(r0^{a+1} + 2(a+1)t/n)^{1/(a+1)}`.
pub fn two_body_exact(r0: f64, alpha: f64, n: usize, t: f64) -> f64 {
    let q = alpha + 1.0;
    (r0.powf(q) + 2.0 * q * t / n as f64).powf(1.0 / q)
}

/// Default blob radius `(1/2) M^{-1/(d+2)} diameter`.
pub fn default_blob_epsilon(m: usize, dim: usize, diameter: f64) -> f64 {
    0.5 * (m as f64).powf(-1.0 / (dim as f64 + 2.0)) * diameter
}

/// Mean-field reference: `m` samples of the initial density moved by the
/// self-consistent blob system with kernel `mollify(kernel, epsilon)`.
pub fn meanfield_reference<F>(
    sample: F,
    kernel: &KernelSpec,
    epsilon: f64,
    m: usize,
    t_end: f64,
    controls: &IntegratorControls,
    seed: Option<u64>,
) -> std::result::Result<Trajectory, Box<SimulationFailure>>
where
    F: FnOnce(usize) -> Result<ParticleConfig>,
{
    let fail = |error: Error| {
        Box::new(SimulationFailure {
            error,
            trajectory: Trajectory {
                kernel: kernel.clone(),
                c_k: f64::NAN,
                controls: controls.clone(),
                seed,
                sample_times: vec![],
                configs: vec![],
                diagnostics: vec![],
                step_log: vec![],
            },
        })
    };
    let blob = kernel.mollify(epsilon).map_err(fail)?;
    let cloud = sample(m).map_err(fail)?;
    if cloud.n() != m {
        return Err(fail(invalid(format!("sampler returned {} points, expected {m}", cloud.n()))));
    }
    let mut reference_controls = controls.clone();
    reference_controls.diagnostics_delta = None;
    simulate_seeded(&cloud, &blob, t_end, &reference_controls, seed)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvHeader {
    n: usize,
    dim: usize,
    kernel: KernelSpec,
    #[serde(with = "crate::jsonfloat")]
    c_k: f64,
    controls: IntegratorControls,
    seed: Option<u64>,
    step_log: Vec<f64>,
}

const CSV_MAGIC: &str = "# chaoslab trajectory v1";

impl Trajectory {
    pub fn final_config(&self) -> &ParticleConfig {
        self.configs.last().expect("trajectory has at least one sample")
    }

    /// Header comment lines, then one row per sample:
    /// `t, positions (row-major), d_min, d_min1, close_mass, S`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let first = self.configs.first().ok_or_else(|| invalid("empty trajectory"))?;
        let header = CsvHeader {
            n: first.n(),
            dim: first.dim,
            kernel: self.kernel.clone(),
            c_k: self.c_k,
            controls: self.controls.clone(),
            seed: self.seed,
            step_log: self.step_log.clone(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{CSV_MAGIC}")?;
        writeln!(w, "# {json}")?;
        let mut cols = vec!["t".to_string()];
        for i in 0..first.n() {
            for a in 0..first.dim {
                cols.push(format!("x{i}_{a}"));
            }
        }
        cols.extend(["d_min", "d_min1", "close_mass", "S"].map(String::from));
        writeln!(w, "{}", cols.join(","))?;
        let mut line = String::new();
        for (c, d) in self.configs.iter().zip(&self.diagnostics) {
            line.clear();
            line.push_str(&fmt_f64(c.time));
            for v in c.positions.iter().chain([d.d_min, d.d_min1, d.close_mass, d.s_value].iter()) {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Parse("unexpected end of trajectory".into()))?.map_err(Error::from)
        };
        if next()? != CSV_MAGIC {
            return Err(Error::Parse("not a trajectory file".into()));
        }
        let h = next()?;
        let json = h.strip_prefix("# ").ok_or_else(|| Error::Parse("missing header".into()))?;
        let header: CsvHeader = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        let _columns = next()?;
        let width = 1 + header.n * header.dim + 4;
        let mut traj = Trajectory {
            kernel: header.kernel,
            c_k: header.c_k,
            controls: header.controls,
            seed: header.seed,
            sample_times: vec![],
            configs: vec![],
            diagnostics: vec![],
            step_log: header.step_log,
        };
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != width {
                return Err(Error::Parse(format!("row has {} fields, expected {width}", vals.len())));
            }
            let t = vals[0];
            let pos = vals[1..1 + header.n * header.dim].to_vec();
            let tail = &vals[1 + header.n * header.dim..];
            traj.sample_times.push(t);
            traj.configs.push(ParticleConfig::new(header.dim, pos, t)?);
            traj.diagnostics.push(SampleDiagnostics {
                t,
                d_min: tail[0],
                d_min1: tail[1],
                close_mass: tail[2],
                s_value: tail[3],
            });
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(r: f64, dim: usize) -> ParticleConfig {
        let mut pos = vec![0.0; 2 * dim];
        pos[dim] = r;
        ParticleConfig::new(dim, pos, 0.0).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let k = KernelSpec::power_law(2, 1.0).unwrap();
        assert_eq!(rhs(&pair(1.0, 2), &k).unwrap(), vec![-0.5, 0.0, 0.5, 0.0]);
        let z = KernelSpec::zero(2);
        assert_eq!(rhs(&pair(1.0, 2), &z).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn rhs_rejects_coincident_particles() {
        let k = KernelSpec::power_law(2, 0.5).unwrap();
        let c = ParticleConfig::new(2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(rhs(&c, &k), Err(Error::SingularConfiguration { i: 0, j: 2 }));
        // mollified kernels are bounded, coincidence is harmless
        let m = k.mollify(0.1).unwrap();
        assert!(rhs(&c, &m).is_ok());
    }

    #[test]
    fn rhs_tiles_match_direct_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 700;
        let pos: Vec<f64> = (0..n * 3).map(|_| rng.gen::<f64>()).collect();
        let c = ParticleConfig::new(3, pos, 0.0).unwrap();
        for k in [
            KernelSpec::power_law(3, 0.8).unwrap(),
            KernelSpec::oseen_gravity([0.0, 0.0, -1.0]).unwrap(),
        ] {
            let v = rhs(&c, &k).unwrap();
            for i in [0, 255, 256, 699] {
                for a in 0..3 {
                    let mut s = 0.0;
                    for j in (0..n).filter(|&j| j != i) {
                        let x: Vec<f64> = (0..3).map(|b| c.point(i)[b] - c.point(j)[b]).collect();
                        s += crate::kernels::eval_kernel(&k, &x).unwrap()[a];
                    }
                    assert!((v[i * 3 + a] - s / n as f64).abs() < 1e-12, "{i} {a}");
                }
            }
            let total: Vec<f64> = (0..3).map(|a| (0..n).map(|i| v[i * 3 + a]).sum()).collect();
            if matches!(k.family, KernelFamily::PowerLaw { .. }) {
                assert!(total.iter().all(|s| s.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn adaptive_dt_examples() {
        let k = KernelSpec::power_law(2, 1.0).unwrap().with_c_k_hint(1.0);
        let c = pair(1.0, 2);
        let mut ctl = IntegratorControls { dt_max: 1.0, ..Default::default() };
        assert!((adaptive_dt(&c, &k, &ctl).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(adaptive_dt(&pair(1e6, 2), &k, &ctl).unwrap(), 1.0);
        ctl.d_floor = 1.0;
        assert!(matches!(adaptive_dt(&c, &k, &ctl), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn two_body_examples() {
        assert!((two_body_exact(1.0, 1.0, 2, 1.0) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(two_body_exact(0.7, 0.5, 2, 0.0), 0.7);
        assert_eq!(two_body_exact(1.0, 0.0, 2, 1.0), 2.0);
    }

    #[test]
    fn two_body_matches_closed_form() {
        for &(d, a) in &[(2usize, 0.5), (3, 1.0)] {
            let k = KernelSpec::power_law(d, a).unwrap();
            let ctl = IntegratorControls::default();
            let tr = simulate(&pair(0.5, d), &k, 1.0, &ctl).unwrap();
            let last = tr.final_config();
            assert_eq!(last.time, 1.0);
            let r = last.dist(0, 1);
            let exact = two_body_exact(0.5, a, 2, 1.0);
            assert!(((r - exact) / exact).abs() < 1e-6, "{r} vs {exact}");
            assert!(tr.sample_times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(tr.sample_times.len(), 11);
        }
    }

    #[test]
    fn zero_kernel_is_static() {
        let c = ParticleConfig::new(2, vec![0.1, 0.2, 0.5, 0.5, 0.9, 0.1], 0.0).unwrap();
        let tr = simulate(&c, &KernelSpec::zero(2), 0.35, &IntegratorControls::default()).unwrap();
        assert_eq!(tr.sample_times, vec![0.0, 0.1, 0.2, 0.30000000000000004, 0.35]);
        assert!(tr.configs.iter().all(|x| x.positions == c.positions));
    }

    #[test]
    fn failure_carries_partial_trajectory() {
        let k = KernelSpec::power_law(2, 0.5).unwrap();
        let ctl = IntegratorControls { d_floor: 0.6, ..Default::default() };
        let err = simulate(&pair(0.5, 2), &k, 1.0, &ctl).unwrap_err();
        assert!(matches!(err.error, Error::BlowUp { .. }));
        assert_eq!(err.trajectory.configs.len(), 1);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let k = KernelSpec::power_law(2, 0.3).unwrap();
        let c = ParticleConfig::new(2, vec![0.1, 0.2, 0.5, 0.5, 0.9, 0.1, 0.3, 0.8], 0.0).unwrap();
        let ctl = IntegratorControls { diagnostics_delta: Some(0.2), ..Default::default() };
        let tr = simulate_seeded(&c, &k, 0.2, &ctl, Some(9)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(back.configs, tr.configs);
        assert_eq!(back.step_log, tr.step_log);
        assert_eq!(back.seed, Some(9));
        assert_eq!(back.kernel, tr.kernel);
        assert_eq!(back.diagnostics, tr.diagnostics);
    }
}
