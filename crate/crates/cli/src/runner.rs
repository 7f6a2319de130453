//! Executes a validated spec and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use chaoslab_core::dynamics::{default_blob_epsilon, meanfield_reference, simulate_seeded, SimulationFailure, Trajectory};
use chaoslab_core::montecarlo::{
    assumptions_probability, estimate_close_pairs_tail, estimate_dmin1_tail, estimate_dmin_tail,
    estimate_triple_event, estimate_triple_proximity, replica_seed, sample_config, wasserstein_scaling_study,
    DeltaRule, MCReport,
};
use chaoslab_core::verifier::{
    bootstrap_monitor, check_assumptions, check_conclusions, fitted_c_dist, select_delta, ConclusionReport,
    WpMethod,
};
use chaoslab_core::{Error, KernelSpec, ParticleConfig, PointCloud};
use serde::{Deserialize, Serialize};

use crate::spec::{Estimator, ExperimentSpec, Mode};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid spec: {0}")]
    Validation(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Other(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularConfiguration { .. } | Error::BlowUp { .. } => RunError::Numerical(e.to_string()),
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::TooLarge(_) => {
                RunError::Validation(e.to_string())
            }
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Other(e.to_string())
    }
}

/// Output directory that remembers every file written to it.
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        fs::write(self.dir.join(name), bytes)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| RunError::Other(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn trajectory(&mut self, name: &str, t: &Trajectory) -> Result<(), RunError> {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        self.write(name, &buf)
    }

    fn mc(&mut self, r: &MCReport) -> Result<(), RunError> {
        self.json("report.json", r)?;
        self.write("raw.csv", r.raw_csv().as_bytes())
    }
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
    /// Hard checks that failed; fatal only under `--strict`.
    pub strict_failures: Vec<String>,
}

/// Role of a random stream derived from the run seed.
const PARTICLES: u64 = 0;
const REFERENCE: u64 = 1;

fn stream(seed: u64, n: usize, role: u64) -> u64 {
    replica_seed(seed, n as u64, role)
}

fn sim_error(f: Box<SimulationFailure>, out: &mut Outputs, name: &str) -> RunError {
    if !f.trajectory.configs.is_empty() {
        // best effort: keep what was recorded before the abort
        let _ = out.trajectory(name, &f.trajectory);
    }
    let _ = out.json(
        "failure.json",
        &serde_json::json!({
            "error": f.error.to_string(),
            "samples_recorded": f.trajectory.sample_times.len(),
            "last_time": f.trajectory.sample_times.last(),
        }),
    );
    RunError::from(f.error)
}

fn kernel(spec: &ExperimentSpec) -> Result<&KernelSpec, RunError> {
    spec.kernel.as_ref().ok_or_else(|| RunError::Validation("missing kernel".into()))
}

fn p(spec: &ExperimentSpec) -> Result<f64, RunError> {
    spec.p().ok_or_else(|| RunError::Validation("missing p".into()))
}

pub fn execute(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    out.json("spec.json", spec)?;
    match spec.mode {
        Mode::Simulate => simulate_mode(spec, out),
        Mode::Verify => verify_mode(spec, out),
        Mode::McLemma => mc_mode(spec, out),
        Mode::AssumptionsProb => assumptions_mode(spec, out),
        Mode::ConvergenceStudy => convergence_mode(spec, out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n: usize,
    pub dim: usize,
    pub t_end: f64,
    pub steps: usize,
    pub c_k: f64,
    pub d_min_initial: f64,
    pub d_min_final: f64,
    pub fitted_c_dist: f64,
}

fn simulate_mode(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    let k = kernel(spec)?;
    let t_end = spec.t_end.unwrap_or(0.0);
    let c0 = match &spec.positions {
        Some(rows) => ParticleConfig::from_rows(rows, 0.0)?,
        None => {
            let n = spec.n.unwrap_or(0);
            sample_config(&spec.density(), n, stream(spec.seed, n, PARTICLES))?
        }
    };
    let traj = simulate_seeded(&c0, k, t_end, &spec.integrator, Some(spec.seed))
        .map_err(|f| sim_error(f, out, "trajectory.csv"))?;
    out.trajectory("trajectory.csv", &traj)?;
    let summary = SimulationSummary {
        n: c0.n(),
        dim: c0.dim,
        t_end,
        steps: traj.step_log.len(),
        c_k: traj.c_k,
        d_min_initial: traj.diagnostics[0].d_min,
        d_min_final: traj.diagnostics.last().map_or(f64::NAN, |d| d.d_min),
        fitted_c_dist: fitted_c_dist(&traj),
    };
    out.json("summary.json", &summary)?;
    Ok(RunOutcome {
        summary: vec![format!(
            "simulated N={} to T={} in {} steps; d_min {} -> {}",
            summary.n, t_end, summary.steps, summary.d_min_initial, summary.d_min_final
        )],
        strict_failures: vec![],
    })
}

/// Micro run and blob reference for one system size.
struct Paired {
    micro: Trajectory,
    reference: Trajectory,
    blob_epsilon: f64,
}

fn paired_runs(spec: &ExperimentSpec, c0: &ParticleConfig, cloud: ParticleConfig, n: usize, out: &mut Outputs, name: &str) -> Result<Paired, RunError> {
    let k = kernel(spec)?;
    let t_end = spec.t_end.unwrap_or(0.0);
    let density = spec.density();
    let m = cloud.n();
    let blob_epsilon = spec.blob_epsilon.unwrap_or_else(|| default_blob_epsilon(m, density.dim, density.diameter()));
    let micro = simulate_seeded(c0, k, t_end, &spec.integrator, Some(stream(spec.seed, n, PARTICLES)))
        .map_err(|f| sim_error(f, out, name))?;
    out.trajectory(name, &micro)?;
    let reference = meanfield_reference(
        |_| Ok(cloud),
        k,
        blob_epsilon,
        m,
        t_end,
        &spec.reference_controls(),
        Some(stream(spec.seed, n, REFERENCE)),
    )
    .map_err(|f| sim_error(f, out, &format!("reference_{name}")))?;
    Ok(Paired { micro, reference, blob_epsilon })
}

fn initial_pair(spec: &ExperimentSpec, n: usize) -> Result<(ParticleConfig, ParticleConfig), RunError> {
    let density = spec.density();
    let c0 = sample_config(&density, n, stream(spec.seed, n, PARTICLES))?;
    let cloud = sample_config(&density, spec.reference_factor * n, stream(spec.seed, n, REFERENCE))?;
    Ok((c0, cloud))
}

fn verify_mode(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    let k = kernel(spec)?;
    let p = p(spec)?;
    let n = spec.n.unwrap_or(0);
    let d = k.dimension;
    let delta_n = spec.delta_n.unwrap_or_else(|| select_delta(n, d, spec.eps));
    let method = spec.wp_method.unwrap_or(WpMethod::Exact);
    let (c0, cloud) = initial_pair(spec, n)?;
    let rep = check_assumptions(&c0, &PointCloud::from_config(&cloud), k, delta_n, p, &spec.thresholds, method, spec.seed)?;
    out.json("assumptions.json", &rep)?;
    let mut o = RunOutcome::default();
    o.summary.push(format!("N={n}, delta_N={delta_n}: all hypotheses {}", if rep.all_pass { "hold" } else { "do not hold" }));
    let failed: Vec<&str> = [
        ("delta_N <= d_min1", rep.delta_ok),
        ("conv", rep.cond_conv.pass),
        ("wp", rep.cond_wp.pass),
        ("strong1", rep.cond_strong1.pass),
        ("strong2", rep.cond_strong2.pass),
        ("absorbable", rep.cond_absorbable.pass),
    ]
    .iter()
    .filter(|c| !c.1)
    .map(|c| c.0)
    .collect();
    if !failed.is_empty() {
        o.strict_failures.push(format!("hypotheses failing: {}", failed.join(", ")));
    }
    if spec.t_end.is_some() {
        let pr = paired_runs(spec, &c0, cloud, n, out, "trajectory.csv")?;
        let conc = check_conclusions(&pr.micro, &pr.reference, p, delta_n, method, spec.seed)?;
        out.json("conclusions.json", &conc)?;
        let l1 = spec.l1.unwrap_or(conc.fitted_c_dist / 2.0);
        let boot = bootstrap_monitor(&pr.micro, delta_n, l1, k.alpha())?;
        out.json("bootstrap.json", &boot)?;
        o.summary.push(format!(
            "sup W_p = {}, sup ratio = {}, fitted C_dist = {}, blob epsilon = {}",
            conc.sup_w_p, conc.sup_ratio, conc.fitted_c_dist, pr.blob_epsilon
        ));
        if !(conc.sup_ratio <= 1.5) {
            o.strict_failures.push(format!("sup W_p ratio {} exceeds 1.5", conc.sup_ratio));
        }
        if boot.any_violation {
            o.strict_failures.push("bootstrap monitor: d_min1(t) fell below delta(t)".into());
        }
    }
    Ok(o)
}

fn mc_mode(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    let density = spec.density();
    let ns = spec.sizes();
    let r = spec.replicas.unwrap_or(0);
    let seed = spec.seed;
    let ls = spec.l.clone().unwrap_or_default();
    let rep = match spec.which.ok_or_else(|| RunError::Validation("missing which".into()))? {
        Estimator::Wasserstein => wasserstein_scaling_study(
            &density,
            p(spec)?,
            &ns,
            r,
            spec.reference_factor,
            spec.wp_method.unwrap_or(WpMethod::Exact),
            seed,
        )?,
        Estimator::Dmin => estimate_dmin_tail(&density, &ns, &ls, r, seed)?,
        Estimator::Dmin1 => estimate_dmin1_tail(&density, &ns, &ls, r, seed)?,
        Estimator::TripleProximity => {
            estimate_triple_proximity(&density, &ns, &ls, spec.l2.unwrap_or(1.0), r, seed)?
        }
        Estimator::TripleEvent => {
            let rule = match (spec.delta, spec.delta_exponent) {
                (Some(d), _) => DeltaRule::Fixed(d),
                (None, Some(e)) => DeltaRule::Power(e),
                _ => return Err(RunError::Validation("triple-event needs delta or delta_exponent".into())),
            };
            estimate_triple_event(&density, &ns, spec.beta.unwrap_or(1.0), spec.eps, rule, r, seed)?
        }
        Estimator::ClosePairs => estimate_close_pairs_tail(
            &density,
            &ns,
            &spec.deltas.clone().unwrap_or_default(),
            spec.theta.unwrap_or(0.5),
            r,
            seed,
        )?,
    };
    out.mc(&rep)?;
    Ok(RunOutcome { summary: vec![format!("{}: {} rows over N = {:?}", rep.estimator, rep.rows.len(), ns)], strict_failures: vec![] })
}

/// `hi(N_{k+1}) >= lo(N_k)` for the `all` row.
pub fn nondecreasing_within_error(rep: &MCReport, key: &str) -> bool {
    let rows: Vec<_> = rep.rows.iter().filter(|r| r.key == key).filter_map(|r| r.proportion).collect();
    rows.windows(2).all(|w| w[1].ci_high >= w[0].ci_low)
}

fn assumptions_mode(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    let k = kernel(spec)?;
    let rep = assumptions_probability(
        &spec.density(),
        k,
        p(spec)?,
        spec.eps,
        &spec.sizes(),
        spec.replicas.unwrap_or(0),
        &spec.thresholds,
        spec.wp_method.unwrap_or(WpMethod::LowerBound),
        spec.reference_factor,
        spec.seed,
    )?;
    out.mc(&rep)?;
    let mut o = RunOutcome::default();
    for row in rep.rows.iter().filter(|r| r.key == "all") {
        let pr = row.proportion.expect("proportion rows");
        o.summary.push(format!("N={}: all hypotheses in {}/{} replicas", row.n, pr.successes, pr.trials));
    }
    if !nondecreasing_within_error(&rep, "all") {
        o.strict_failures.push("satisfaction fraction decreases in N beyond Wilson error".into());
    }
    Ok(o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceChecks {
    pub fitted_c_dist: Vec<f64>,
    /// Largest over smallest fitted distance rate; 1 when all vanish.
    pub c_dist_spread: f64,
    pub c_dist_stable: bool,
    pub max_sup_ratio: f64,
    pub sup_ratio_ok: bool,
    pub sup_distance_nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub blob_epsilon: Vec<f64>,
    pub reports: Vec<ConclusionReport>,
    pub checks: ConvergenceChecks,
}

pub fn convergence_checks(reports: &[ConclusionReport]) -> ConvergenceChecks {
    let c: Vec<f64> = reports.iter().map(|r| r.fitted_c_dist).collect();
    let (lo, hi) = c.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = if hi == 0.0 { 1.0 } else { hi / lo };
    let max_sup_ratio = reports.iter().map(|r| r.sup_ratio).fold(0.0, f64::max);
    let nonincreasing = reports.windows(2).all(|w| w[1].sup_w_p <= w[0].sup_w_p + w[1].reference_floor);
    ConvergenceChecks {
        c_dist_stable: c.iter().all(|v| v.is_finite()) && spread <= 2.0,
        fitted_c_dist: c,
        c_dist_spread: spread,
        max_sup_ratio,
        sup_ratio_ok: max_sup_ratio <= 1.5,
        sup_distance_nonincreasing: nonincreasing,
    }
}

fn convergence_mode(spec: &ExperimentSpec, out: &mut Outputs) -> Result<RunOutcome, RunError> {
    let p = p(spec)?;
    let d = kernel(spec)?.dimension;
    let method = spec.wp_method.unwrap_or(WpMethod::Exact);
    let mut reports = vec![];
    let mut eps = vec![];
    let mut table = String::from("n,m,blob_epsilon,w_p0,sup_w_p,sup_ratio,fitted_c_dist,fitted_c_wp,reference_floor\n");
    for n in spec.sizes() {
        let (c0, cloud) = initial_pair(spec, n)?;
        let pr = paired_runs(spec, &c0, cloud, n, out, &format!("trajectory_n{n}.csv"))?;
        let delta_n = spec.delta_n.unwrap_or_else(|| select_delta(n, d, spec.eps));
        let rep = check_conclusions(&pr.micro, &pr.reference, p, delta_n, method, spec.seed)?;
        table.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            n,
            rep.m,
            pr.blob_epsilon,
            rep.samples[0].w_p,
            rep.sup_w_p,
            rep.sup_ratio,
            rep.fitted_c_dist,
            rep.fitted_c_wp,
            rep.reference_floor
        ));
        eps.push(pr.blob_epsilon);
        reports.push(rep);
    }
    out.write("convergence.csv", table.as_bytes())?;
    let checks = convergence_checks(&reports);
    let study = ConvergenceStudy { blob_epsilon: eps, reports, checks: checks.clone() };
    out.json("convergence.json", &study)?;
    let mut o = RunOutcome::default();
    for r in &study.reports {
        o.summary.push(format!(
            "N={}: sup W_p = {}, sup ratio = {}, fitted C_dist = {}",
            r.n, r.sup_w_p, r.sup_ratio, r.fitted_c_dist
        ));
    }
    if !checks.c_dist_stable {
        o.strict_failures.push(format!("fitted C_dist not stable within a factor 2: {:?}", checks.fitted_c_dist));
    }
    if !checks.sup_ratio_ok {
        o.strict_failures.push(format!("sup W_p ratio {} exceeds 1.5", checks.max_sup_ratio));
    }
    if !checks.sup_distance_nonincreasing {
        o.strict_failures.push("sup W_p increases with N beyond the reference floor".into());
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chaoslab_core::stats::Proportion;
    use chaoslab_core::verifier::ConclusionSample;

    fn conc(n: usize, c: f64, sup: f64, ratio: f64, floor: f64) -> ConclusionReport {
        ConclusionReport {
            n,
            m: 16 * n,
            p: 2.0,
            delta_n: 0.01,
            fitted_c_dist: c,
            fitted_c_wp: 0.0,
            wp_slope: 0.0,
            prefactor: 1.0,
            envelope_prefactor: 1.0,
            penalty: 0.0,
            reference_floor: floor,
            sup_w_p: sup,
            sup_ratio: ratio,
            samples: vec![ConclusionSample { t: 0.0, w_p: sup, min_distance_ratio: 1.0, bound: sup, ratio_to_initial: 1.0 }],
        }
    }

    #[test]
    fn convergence_check_rules() {
        let c = convergence_checks(&[conc(512, 0.0, 0.1, 1.0, 0.01), conc(2048, 0.0, 0.105, 1.2, 0.01)]);
        assert!(c.c_dist_stable && c.sup_ratio_ok && c.sup_distance_nonincreasing);
        assert_eq!(c.c_dist_spread, 1.0);
        let c = convergence_checks(&[conc(512, 1.0, 0.1, 1.0, 0.01), conc(2048, 2.5, 0.2, 1.6, 0.01)]);
        assert!(!c.c_dist_stable && !c.sup_ratio_ok && !c.sup_distance_nonincreasing);
        let c = convergence_checks(&[conc(512, 0.0, 0.1, 1.0, 0.01), conc(2048, 0.3, 0.1, 1.0, 0.01)]);
        assert!(!c.c_dist_stable);
    }

    #[test]
    fn monotone_within_error() {
        let mut rep: MCReport = serde_json::from_value(serde_json::json!({
            "estimator": "x", "params": {}, "seed": 0, "replicas": 100, "rows": [],
            "fits": [], "warnings": [], "flag_names": []
        }))
        .unwrap();
        for (n, s) in [(500, 10), (2000, 8), (8000, 30)] {
            rep.rows.push(chaoslab_core::montecarlo::MCRow {
                n,
                key: "all".into(),
                proportion: Some(Proportion::wilson(s, 100)),
                stats: Default::default(),
            });
        }
        assert!(nondecreasing_within_error(&rep, "all"));
        rep.rows[2].proportion = Some(Proportion::wilson(0, 100));
        assert!(!nondecreasing_within_error(&rep, "all"));
    }

    #[test]
    fn error_classes() {
        assert_eq!(RunError::from(Error::SingularConfiguration { i: 0, j: 1 }).exit_code(), 3);
        assert_eq!(RunError::from(Error::InvalidArgument("x".into())).exit_code(), 2);
    }
}
