//! Interaction kernels `K: R^d -> R^d` and their numerical certificates.
//!
//! Every family is evaluated with the convention `K(0) = 0`. The singular
//! families behave like `|x|^{-alpha}` at the origin; [`KernelSpec::mollify`]
//! produces the bounded blob kernel used by the reference solver.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Direction field of a power-law kernel `K(x) = A x / |x|^{alpha+1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Orientation {
    /// `A = Id`, the radially repulsive kernel.
    Repulsive,
    /// A user matrix `A` (row-major, `d x d`). Skew matrices give
    /// divergence-free vortex-type kernels; `-Id` is the attractive
    /// negative control.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    PowerLaw { alpha: f64, orientation: Orientation },
    /// `K(x) = Phi(x) g` with the Oseen tensor `Phi`; three dimensions only.
    OseenGravity { g: [f64; 3] },
    Mollified { base: Box<KernelSpec>, epsilon: f64 },
    Scaled { base: Box<KernelSpec>, c: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelConfig", into = "KernelConfig")]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dimension: usize,
    /// Known bound `C_K` in `|K(x)| + |x||grad K(x)| <= C_K |x|^{-alpha}`
    /// (Frobenius norm on the gradient). `None` means "estimate it".
    c_k_hint: Option<f64>,
}

impl KernelSpec {
    /// Repulsive power law `x / |x|^{alpha+1}`.
    pub fn power_law(dimension: usize, alpha: f64) -> Result<Self> {
        Self::check_power(dimension, alpha)?;
        Ok(Self {
            family: KernelFamily::PowerLaw { alpha, orientation: Orientation::Repulsive },
            dimension,
            c_k_hint: None,
        })
    }

    /// Power law with a custom matrix, `A x / |x|^{alpha+1}`.
    pub fn power_law_custom(dimension: usize, alpha: f64, matrix: Vec<f64>) -> Result<Self> {
        Self::check_power(dimension, alpha)?;
        if matrix.len() != dimension * dimension {
            return Err(invalid(format!(
                "custom matrix needs {} entries, got {}",
                dimension * dimension,
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid("custom matrix has non-finite entries"));
        }
        Ok(Self {
            family: KernelFamily::PowerLaw { alpha, orientation: Orientation::Custom(matrix) },
            dimension,
            c_k_hint: None,
        })
    }

    pub fn oseen_gravity(g: [f64; 3]) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(invalid("gravity vector must be finite"));
        }
        Ok(Self { family: KernelFamily::OseenGravity { g }, dimension: 3, c_k_hint: None })
    }

    pub fn zero(dimension: usize) -> Self {
        Self { family: KernelFamily::Zero, dimension, c_k_hint: None }
    }

    fn check_power(dimension: usize, alpha: f64) -> Result<()> {
        if dimension == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(alpha.is_finite() && alpha >= 0.0 && alpha < dimension as f64) {
            return Err(invalid(format!(
                "power-law exponent alpha = {alpha} must lie in [0, d) = [0, {dimension})"
            )));
        }
        Ok(())
    }

    /// Linear radial taper inside `|x| < epsilon`:
    /// `K_eps(x) = (|x|/eps) K(eps x/|x|)`, unchanged outside.
    pub fn mollify(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("mollification radius must be positive, got {epsilon}")));
        }
        Ok(Self {
            family: KernelFamily::Mollified { base: Box::new(self.clone()), epsilon },
            dimension: self.dimension,
            c_k_hint: None,
        })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("scale factor must be positive, got {c}")));
        }
        Ok(Self {
            family: KernelFamily::Scaled { base: Box::new(self.clone()), c },
            dimension: self.dimension,
            c_k_hint: None,
        })
    }

    pub fn with_c_k_hint(mut self, c_k: f64) -> Self {
        self.c_k_hint = Some(c_k);
        self
    }

    /// Singularity exponent.
    pub fn alpha(&self) -> f64 {
        match &self.family {
            KernelFamily::PowerLaw { alpha, .. } => *alpha,
            KernelFamily::OseenGravity { .. } => 1.0,
            KernelFamily::Mollified { base, .. } | KernelFamily::Scaled { base, .. } => base.alpha(),
            KernelFamily::Zero => 0.0,
        }
    }

    /// True when the kernel is unbounded (or discontinuous) at the origin,
    /// so that coincident particles make the dynamics ill-defined.
    pub fn is_singular(&self) -> bool {
        match &self.family {
            KernelFamily::PowerLaw { .. } | KernelFamily::OseenGravity { .. } => true,
            KernelFamily::Scaled { base, .. } => base.is_singular(),
            KernelFamily::Mollified { .. } | KernelFamily::Zero => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            KernelFamily::Zero => true,
            KernelFamily::Scaled { base, .. } | KernelFamily::Mollified { base, .. } => base.is_zero(),
            _ => false,
        }
    }

    /// Radius below which the kernel is regularised (0 if never).
    pub fn core_radius(&self) -> f64 {
        match &self.family {
            KernelFamily::Mollified { base, epsilon } => epsilon.max(base.core_radius()),
            KernelFamily::Scaled { base, .. } => base.core_radius(),
            _ => 0.0,
        }
    }

    /// Analytic or user-supplied `C_K`, if one is known.
    pub fn c_k_hint(&self) -> Option<f64> {
        if self.c_k_hint.is_some() {
            return self.c_k_hint;
        }
        match &self.family {
            KernelFamily::PowerLaw { alpha, orientation: Orientation::Repulsive } => {
                // |x|^a |K| = 1 and |x|^{a+1} |grad K|_F = sqrt(d - 1 + a^2).
                Some(1.0 + ((self.dimension as f64 - 1.0) + alpha * alpha).sqrt())
            }
            KernelFamily::PowerLaw { .. } | KernelFamily::OseenGravity { .. } => None,
            KernelFamily::Mollified { base, .. } => base.c_k_hint(),
            KernelFamily::Scaled { base, c } => base.c_k_hint().map(|v| c * v),
            KernelFamily::Zero => Some(0.0),
        }
    }

    /// `C_K` from the hint, or estimated on the shell `[r_min, r_max]` by
    /// [`check_c_alpha`] with a fixed seed.
    pub fn c_k_or_estimate(&self, r_min: f64, r_max: f64) -> f64 {
        if let Some(c) = self.c_k_hint() {
            return c;
        }
        let r_min = if r_min > 0.0 { r_min } else { 1.0 };
        let r_max = r_max.max(r_min);
        let mut sampler = ShellSampler::new(self.dimension, r_min, r_max, 0x5eed_c0de);
        check_c_alpha(self, &mut sampler, 2048, FdStep::default()).c_k_estimate
    }

    /// Evaluates `K(x)` into `out` without argument checks.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            KernelFamily::PowerLaw { alpha, orientation } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let f = r2.powf(-0.5 * (alpha + 1.0));
                match orientation {
                    Orientation::Repulsive => {
                        for (o, xi) in out.iter_mut().zip(x) {
                            *o = xi * f;
                        }
                    }
                    Orientation::Custom(a) => {
                        let d = x.len();
                        for (row, o) in out.iter_mut().enumerate() {
                            let ax: f64 = (0..d).map(|c| a[row * d + c] * x[c]).sum();
                            *o = ax * f;
                        }
                    }
                }
            }
            KernelFamily::OseenGravity { g } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let r = r2.sqrt();
                let s = (x[0] * g[0] + x[1] * g[1] + x[2] * g[2]) / r2;
                let pre = 1.0 / (8.0 * PI * r);
                for k in 0..3 {
                    out[k] = (g[k] + x[k] * s) * pre;
                }
            }
            KernelFamily::Mollified { base, epsilon } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    out.fill(0.0);
                    return;
                }
                let r = r2.sqrt();
                if r >= *epsilon {
                    base.eval_into(x, out);
                } else {
                    let mut y = [0.0f64; 8];
                    let mut heap;
                    let y: &mut [f64] = if x.len() <= 8 {
                        &mut y[..x.len()]
                    } else {
                        heap = vec![0.0; x.len()];
                        &mut heap
                    };
                    let s = epsilon / r;
                    for (yi, xi) in y.iter_mut().zip(x) {
                        *yi = xi * s;
                    }
                    base.eval_into(y, out);
                    let t = r / epsilon;
                    for o in out.iter_mut() {
                        *o *= t;
                    }
                }
            }
            KernelFamily::Scaled { base, c } => {
                base.eval_into(x, out);
                for o in out.iter_mut() {
                    *o *= c;
                }
            }
            KernelFamily::Zero => out.fill(0.0),
        }
    }
}

/// Evaluates `K(x)`, with `K(0) = 0`.
pub fn eval_kernel(kernel: &KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != kernel.dimension {
        return Err(Error::DimensionMismatch { expected: kernel.dimension, got: x.len() });
    }
    let mut out = vec![0.0; kernel.dimension];
    kernel.eval_into(x, &mut out);
    Ok(out)
}

/// Source of nonzero test points for the kernel certificates.
pub trait PointSampler {
    fn dim(&self) -> usize;
    fn sample_into(&mut self, out: &mut [f64]);
}

/// Uniform direction, radius uniform in `[r_min, r_max]`.
#[derive(Debug, Clone)]
pub struct ShellSampler {
    dim: usize,
    r_min: f64,
    r_max: f64,
    rng: ChaCha8Rng,
}

impl ShellSampler {
    pub fn new(dim: usize, r_min: f64, r_max: f64, seed: u64) -> Self {
        assert!(dim >= 1 && r_min > 0.0 && r_max >= r_min, "invalid shell");
        Self { dim, r_min, r_max, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl PointSampler for ShellSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&mut self, out: &mut [f64]) {
        loop {
            // Box-Muller pairs give an isotropic Gaussian direction.
            let mut i = 0;
            while i < self.dim {
                let u1: f64 = 1.0 - self.rng.gen::<f64>();
                let u2: f64 = self.rng.gen();
                let rad = (-2.0 * u1.ln()).sqrt();
                out[i] = rad * (2.0 * PI * u2).cos();
                if i + 1 < self.dim {
                    out[i + 1] = rad * (2.0 * PI * u2).sin();
                }
                i += 2;
            }
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                let r = self.r_min + (self.r_max - self.r_min) * self.rng.gen::<f64>();
                for v in out.iter_mut() {
                    *v *= r / norm;
                }
                return;
            }
        }
    }
}

/// Replays a fixed list of points, cycling if asked for more.
#[derive(Debug, Clone)]
pub struct ListSampler {
    dim: usize,
    points: Vec<Vec<f64>>,
    next: usize,
}

impl ListSampler {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        assert!(!points.is_empty());
        let dim = points[0].len();
        assert!(points.iter().all(|p| p.len() == dim));
        Self { dim, points, next: 0 }
    }
}

impl PointSampler for ListSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&mut self, out: &mut [f64]) {
        out.copy_from_slice(&self.points[self.next % self.points.len()]);
        self.next += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonAttractiveReport {
    /// `max(0, -(K(x) - K(-x)) . x)` over the samples.
    pub max_violation: f64,
    /// Sample with the largest `-(K(x) - K(-x)) . x`.
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

pub fn check_nonattractive(
    kernel: &KernelSpec,
    sampler: &mut dyn PointSampler,
    n_samples: usize,
) -> NonAttractiveReport {
    assert!(n_samples >= 1, "need at least one sample");
    assert_eq!(sampler.dim(), kernel.dimension, "sampler dimension");
    let d = kernel.dimension;
    let mut x = vec![0.0; d];
    let mut neg = vec![0.0; d];
    let mut kp = vec![0.0; d];
    let mut km = vec![0.0; d];
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = vec![0.0; d];
    for _ in 0..n_samples {
        sampler.sample_into(&mut x);
        for (n, v) in neg.iter_mut().zip(&x) {
            *n = -v;
        }
        kernel.eval_into(&x, &mut kp);
        kernel.eval_into(&neg, &mut km);
        let s: f64 = (0..d).map(|k| (kp[k] - km[k]) * x[k]).sum();
        if -s > worst {
            worst = -s;
            worst_point.copy_from_slice(&x);
        }
    }
    NonAttractiveReport { max_violation: worst.max(0.0), worst_point, samples: n_samples }
}

/// Finite-difference step for the gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FdStep {
    Absolute(f64),
    /// Step `factor * |x|`.
    Relative(f64),
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep::Relative(1e-4)
    }
}

impl FdStep {
    fn at(&self, r: f64) -> f64 {
        match *self {
            FdStep::Absolute(h) => h,
            FdStep::Relative(f) => f * r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CAlphaReport {
    /// `max |x|^a |K(x)| + |x|^{a+1} |grad K(x)|_F` over the evaluated samples.
    pub c_k_estimate: f64,
    /// `max |div K(x)|` over the evaluated samples.
    pub max_div: f64,
    pub evaluated: usize,
    /// Samples closer to the origin than ten finite-difference steps.
    pub skipped: usize,
}

pub fn check_c_alpha(
    kernel: &KernelSpec,
    sampler: &mut dyn PointSampler,
    n_samples: usize,
    fd_step: FdStep,
) -> CAlphaReport {
    assert_eq!(sampler.dim(), kernel.dimension, "sampler dimension");
    let d = kernel.dimension;
    let alpha = kernel.alpha();
    let mut x = vec![0.0; d];
    let mut xp = vec![0.0; d];
    let mut kx = vec![0.0; d];
    let mut kp = vec![0.0; d];
    let mut km = vec![0.0; d];
    let mut report = CAlphaReport { c_k_estimate: 0.0, max_div: 0.0, evaluated: 0, skipped: 0 };
    for _ in 0..n_samples {
        sampler.sample_into(&mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = fd_step.at(r);
        if !(h > 0.0) || r < 10.0 * h {
            report.skipped += 1;
            continue;
        }
        kernel.eval_into(&x, &mut kx);
        let mut frob2 = 0.0;
        let mut div = 0.0;
        for b in 0..d {
            xp.copy_from_slice(&x);
            xp[b] = x[b] + h;
            kernel.eval_into(&xp, &mut kp);
            xp[b] = x[b] - h;
            kernel.eval_into(&xp, &mut km);
            for a in 0..d {
                let j = (kp[a] - km[a]) / (2.0 * h);
                frob2 += j * j;
                if a == b {
                    div += j;
                }
            }
        }
        let knorm = kx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let est = r.powf(alpha) * knorm + r.powf(alpha + 1.0) * frob2.sqrt();
        report.c_k_estimate = report.c_k_estimate.max(est);
        report.max_div = report.max_div.max(div.abs());
        report.evaluated += 1;
    }
    report
}

/// Flat, serialisable form of a kernel: a base family with an optional
/// positive scale and an optional mollification radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `power-law`, `power-law-custom`, `oseen-gravity` or `zero`.
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_k: Option<f64>,
}

impl TryFrom<KernelConfig> for KernelSpec {
    type Error = Error;

    fn try_from(cfg: KernelConfig) -> Result<Self> {
        let need_alpha = || cfg.alpha.ok_or_else(|| invalid("kernel.alpha is required"));
        let need_dim = || cfg.dimension.ok_or_else(|| invalid("kernel.dimension is required"));
        let mut k = match cfg.family.as_str() {
            "power-law" => KernelSpec::power_law(need_dim()?, need_alpha()?)?,
            "power-law-custom" => {
                let m = cfg.matrix.clone().ok_or_else(|| invalid("kernel.matrix is required"))?;
                KernelSpec::power_law_custom(need_dim()?, need_alpha()?, m)?
            }
            "oseen-gravity" => {
                if let Some(d) = cfg.dimension {
                    if d != 3 {
                        return Err(invalid("oseen-gravity kernel is three-dimensional"));
                    }
                }
                if let Some(a) = cfg.alpha {
                    if a != 1.0 {
                        return Err(invalid("oseen-gravity kernel has alpha = 1"));
                    }
                }
                KernelSpec::oseen_gravity(cfg.g.unwrap_or([0.0, 0.0, -1.0]))?
            }
            "zero" => KernelSpec::zero(need_dim()?),
            other => return Err(invalid(format!("unknown kernel family '{other}'"))),
        };
        if let Some(c) = cfg.scale {
            k = k.scaled(c)?;
        }
        if let Some(eps) = cfg.epsilon {
            k = k.mollify(eps)?;
        }
        if let Some(c) = cfg.c_k {
            k = k.with_c_k_hint(c);
        }
        Ok(k)
    }
}

impl From<KernelSpec> for KernelConfig {
    fn from(k: KernelSpec) -> Self {
        // Scaling commutes with mollification and nested mollifications
        // collapse to the largest radius, so every spec has this normal form.
        fn walk(k: &KernelSpec, scale: &mut f64, eps: &mut f64) -> KernelConfig {
            match &k.family {
                KernelFamily::Scaled { base, c } => {
                    *scale *= c;
                    walk(base, scale, eps)
                }
                KernelFamily::Mollified { base, epsilon } => {
                    *eps = eps.max(*epsilon);
                    walk(base, scale, eps)
                }
                KernelFamily::PowerLaw { alpha, orientation } => KernelConfig {
                    family: match orientation {
                        Orientation::Repulsive => "power-law".into(),
                        Orientation::Custom(_) => "power-law-custom".into(),
                    },
                    dimension: Some(k.dimension),
                    alpha: Some(*alpha),
                    g: None,
                    matrix: match orientation {
                        Orientation::Custom(m) => Some(m.clone()),
                        Orientation::Repulsive => None,
                    },
                    scale: None,
                    epsilon: None,
                    c_k: None,
                },
                KernelFamily::OseenGravity { g } => KernelConfig {
                    family: "oseen-gravity".into(),
                    dimension: Some(3),
                    alpha: Some(1.0),
                    g: Some(*g),
                    matrix: None,
                    scale: None,
                    epsilon: None,
                    c_k: None,
                },
                KernelFamily::Zero => KernelConfig {
                    family: "zero".into(),
                    dimension: Some(k.dimension),
                    alpha: None,
                    g: None,
                    matrix: None,
                    scale: None,
                    epsilon: None,
                    c_k: None,
                },
            }
        }
        let mut scale = 1.0;
        let mut eps = 0.0f64;
        let mut cfg = walk(&k, &mut scale, &mut eps);
        if scale != 1.0 {
            cfg.scale = Some(scale);
        }
        if eps > 0.0 {
            cfg.epsilon = Some(eps);
        }
        cfg.c_k = k.c_k_hint;
        cfg
    }
}
