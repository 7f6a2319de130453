//! Experiment specification: a single JSON document, unknown keys rejected.

use chaoslab_core::dynamics::IntegratorControls;
use chaoslab_core::kernels::KernelConfig;
use chaoslab_core::montecarlo::DensitySpec;
use chaoslab_core::verifier::{regime_warnings, Thresholds, WpMethod};
use chaoslab_core::KernelSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Verify,
    McLemma,
    AssumptionsProb,
    ConvergenceStudy,
}

/// Which probabilistic statement an `mc-lemma` run estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Empirical-measure transport scaling.
    Wasserstein,
    /// Tail of the minimal distance.
    Dmin,
    /// Tail of the second minimal distance.
    Dmin1,
    /// Two neighbours of one particle within `L1` and `L2`.
    TripleProximity,
    /// Close pair with a large three-particle interaction term.
    TripleEvent,
    /// Many particles with a close nearest neighbour.
    ClosePairs,
}

/// A float that also reads `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Real(#[serde(with = "chaoslab_core::jsonfloat")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    /// Initial law; defaults to the uniform cube in the kernel's dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    /// Explicit initial positions for `simulate`, replacing sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Real>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Overrides `delta_N = N^{-3/(2d) - eps}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_n: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub integrator: IntegratorControls,
    /// Controls for the blob reference run; defaults to `integrator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_integrator: Option<IntegratorControls>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// `L` values (`dmin`, `dmin1`) or `L1` values (`triple-proximity`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Fixed cut-off radius for `triple-event`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// `delta = N^{-delta_exponent}` for `triple-event`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_exponent: Option<f64>,
    /// Radii (in units of `N^{-1/d}`) for `close-pairs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_reference_factor")]
    pub reference_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wp_method: Option<WpMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob_epsilon: Option<f64>,
    /// Contraction rate in the bootstrap monitor; defaults to half the
    /// fitted distance rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
}

fn default_eps() -> f64 {
    0.02
}

fn default_reference_factor() -> usize {
    16
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Parses and validates; `None` when the document does not parse.
pub fn parse_and_validate(text: &str) -> (Option<ExperimentSpec>, Diagnostics) {
    match serde_json::from_str::<ExperimentSpec>(text) {
        Ok(spec) => {
            let d = validate(&spec);
            (Some(spec), d)
        }
        Err(e) => (None, Diagnostics { errors: vec![format!("spec: {e}")], warnings: vec![] }),
    }
}

impl ExperimentSpec {
    pub fn dim(&self) -> Option<usize> {
        self.kernel
            .as_ref()
            .map(|k| k.dimension)
            .or(self.density.as_ref().map(|d| d.dim))
            .or(self.positions.as_ref().and_then(|p| p.first().map(|r| r.len())))
    }

    pub fn density(&self) -> DensitySpec {
        self.density.clone().unwrap_or_else(|| {
            DensitySpec::uniform_cube(self.dim().unwrap_or(2)).expect("positive dimension")
        })
    }

    pub fn p(&self) -> Option<f64> {
        self.p.map(|r| r.0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.n_list.clone().or(self.n.map(|n| vec![n])).unwrap_or_default()
    }

    pub fn reference_controls(&self) -> IntegratorControls {
        self.reference_integrator.clone().unwrap_or_else(|| self.integrator.clone())
    }
}

/// Singularity exponent of a power-law kernel, looking through scaling and
/// mollification.
fn power_law_alpha(k: &KernelSpec) -> Option<f64> {
    let cfg = KernelConfig::from(k.clone());
    cfg.family.starts_with("power-law").then(|| cfg.alpha).flatten()
}

pub fn validate(s: &ExperimentSpec) -> Diagnostics {
    let mut d = Diagnostics::default();
    let mut err = |m: String| d.errors.push(m);
    let need = |present: bool, field: &str, err: &mut dyn FnMut(String)| {
        if !present {
            err(format!("mode `{}` requires `{field}`", mode_name(s.mode)));
        }
    };

    match s.mode {
        Mode::Simulate => {
            need(s.kernel.is_some(), "kernel", &mut err);
            need(s.t_end.is_some(), "t_end", &mut err);
            need(s.n.is_some() || s.positions.is_some(), "n or positions", &mut err);
        }
        Mode::Verify => {
            need(s.kernel.is_some(), "kernel", &mut err);
            need(s.n.is_some(), "n", &mut err);
            need(s.p.is_some(), "p", &mut err);
        }
        Mode::McLemma => {
            need(s.which.is_some(), "which", &mut err);
            need(s.n_list.is_some(), "n_list", &mut err);
            need(s.replicas.is_some(), "replicas", &mut err);
            need(s.density.is_some() || s.kernel.is_some(), "density", &mut err);
            match s.which {
                Some(Estimator::Wasserstein) => need(s.p.is_some(), "p", &mut err),
                Some(Estimator::Dmin) | Some(Estimator::Dmin1) => need(s.l.is_some(), "l", &mut err),
                Some(Estimator::TripleProximity) => {
                    need(s.l.is_some(), "l", &mut err);
                    need(s.l2.is_some(), "l2", &mut err);
                }
                Some(Estimator::TripleEvent) => {
                    need(s.beta.is_some(), "beta", &mut err);
                    if s.delta.is_some() == s.delta_exponent.is_some() {
                        err("mc-lemma `triple-event` requires exactly one of `delta`, `delta_exponent`".into());
                    }
                }
                Some(Estimator::ClosePairs) => {
                    need(s.deltas.is_some(), "deltas", &mut err);
                    need(s.theta.is_some(), "theta", &mut err);
                }
                None => {}
            }
        }
        Mode::AssumptionsProb => {
            need(s.kernel.is_some(), "kernel", &mut err);
            need(s.n_list.is_some(), "n_list", &mut err);
            need(s.replicas.is_some(), "replicas", &mut err);
            need(s.p.is_some(), "p", &mut err);
        }
        Mode::ConvergenceStudy => {
            need(s.kernel.is_some(), "kernel", &mut err);
            need(s.n_list.is_some(), "n_list", &mut err);
            need(s.t_end.is_some(), "t_end", &mut err);
            need(s.p.is_some(), "p", &mut err);
        }
    }

    let dim = s.dim();
    if let (Some(k), Some(dens)) = (&s.kernel, &s.density) {
        if k.dimension != dens.dim {
            err(format!("kernel dimension {} differs from density dimension {}", k.dimension, dens.dim));
        }
    }
    if let Some(k) = &s.kernel {
        if let Some(alpha) = power_law_alpha(k) {
            let dm1 = k.dimension as f64 - 1.0;
            if !(alpha > 0.0 && alpha < dm1) {
                err(format!(
                    "kernel.alpha = {alpha} is outside the admissible open interval (0, d-1) = (0, {dm1}) \
                     required by the kernel singularity condition"
                ));
            }
        }
    }
    if let Some(rows) = &s.positions {
        if rows.len() < 2 {
            err("`positions` needs at least two particles".into());
        }
        if let Some(d0) = dim {
            if rows.iter().any(|r| r.len() != d0) {
                err(format!("every row of `positions` must have {d0} coordinates"));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            err("`positions` must be finite".into());
        }
        if let Some(n) = s.n {
            if n != rows.len() {
                err(format!("`n` = {n} but `positions` has {} rows", rows.len()));
            }
        }
    }
    if let Some(n) = s.n {
        if n < 2 {
            err(format!("`n` must be at least 2, got {n}"));
        }
    }
    if let Some(list) = &s.n_list {
        if list.is_empty() {
            err("`n_list` must not be empty".into());
        }
        if let Some(n) = list.iter().find(|&&n| n < 3) {
            err(format!("`n_list` entries must be at least 3, got {n}"));
        }
        if list.windows(2).any(|w| w[1] <= w[0]) {
            err("`n_list` must be strictly increasing".into());
        }
    }
    if let Some(t) = s.t_end {
        if !(t > 0.0 && t.is_finite()) {
            err(format!("`t_end` must be positive and finite, got {t}"));
        }
    }
    if let Some(p) = s.p() {
        if !(p >= 1.0) {
            err(format!("`p` must lie in [1, inf], got {p}"));
        }
    }
    if !(s.eps > 0.0 && s.eps < 1.0) {
        err(format!("`eps` must lie in (0, 1), got {}", s.eps));
    }
    if let Some(dn) = s.delta_n {
        if !(dn > 0.0 && dn.is_finite()) {
            err(format!("`delta_n` must be positive, got {dn}"));
        }
    }
    if let Err(e) = s.thresholds.validate() {
        err(format!("thresholds: {e}"));
    }
    if let Err(e) = s.integrator.validate() {
        err(format!("integrator: {e}"));
    }
    if let Some(r) = &s.reference_integrator {
        if let Err(e) = r.validate() {
            err(format!("reference_integrator: {e}"));
        }
    }
    if let Some(r) = s.replicas {
        let min = if s.mode == Mode::McLemma { 30 } else { 1 };
        if r < min {
            err(format!("`replicas` must be at least {min}, got {r}"));
        }
    }
    if s.reference_factor == 0 {
        err("`reference_factor` must be positive".into());
    }
    if let Some(ls) = &s.l {
        if ls.is_empty() || ls.iter().any(|l| !(*l > 0.0)) {
            err("`l` must be a nonempty list of positive values".into());
        }
    }
    for (name, v) in [("l2", s.l2), ("beta", s.beta), ("blob_epsilon", s.blob_epsilon), ("delta_exponent", s.delta_exponent)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                err(format!("`{name}` must be positive, got {v}"));
            }
        }
    }
    if let Some(v) = s.delta {
        if !(v >= 0.0) {
            err(format!("`delta` must be nonnegative, got {v}"));
        }
    }
    if let Some(ds) = &s.deltas {
        if ds.is_empty() || ds.iter().any(|v| !(*v >= 0.0)) {
            err("`deltas` must be a nonempty list of nonnegative values".into());
        }
    }
    if let Some(t) = s.theta {
        if !(t > 0.0 && t < 1.0) {
            err(format!("`theta` must lie in (0, 1), got {t}"));
        }
    }
    if let Some(l1) = s.l1 {
        if !(l1 >= 0.0) {
            err(format!("`l1` must be nonnegative, got {l1}"));
        }
    }

    // regime of the propagation-of-chaos statement: warnings only
    if let (Some(k), Some(dim)) = (&s.kernel, dim) {
        if let Some(alpha) = power_law_alpha(k) {
            if d.errors.is_empty() {
                d.warnings.extend(regime_warnings(dim, alpha, s.p().unwrap_or(f64::INFINITY)));
            }
        }
    }
    d
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Simulate => "simulate",
        Mode::Verify => "verify",
        Mode::McLemma => "mc-lemma",
        Mode::AssumptionsProb => "assumptions-prob",
        Mode::ConvergenceStudy => "convergence-study",
    }
}
