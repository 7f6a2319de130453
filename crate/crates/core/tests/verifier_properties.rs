use chaoslab_core::dynamics::{simulate, IntegratorControls, Trajectory};
use chaoslab_core::montecarlo::{sample_config, DensitySpec};
use chaoslab_core::verifier::{
    check_assumptions, check_cutoff_bound, fitted_c_dist, select_delta, wp_condition_terms, AssumptionReport,
    Thresholds, WpMethod,
};
use chaoslab_core::{KernelSpec, ParticleConfig, PointCloud};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn same_report(a: &AssumptionReport, b: &AssumptionReport) {
    assert_eq!(a.all_pass, b.all_pass);
    assert_eq!(a.delta_ok, b.delta_ok);
    assert_eq!(a.cond_conv.pass, b.cond_conv.pass);
    assert_eq!(a.cond_wp.pass, b.cond_wp.pass);
    assert_eq!(a.cond_strong1.pass, b.cond_strong1.pass);
    assert_eq!(a.cond_strong1.qualifying_pairs, b.cond_strong1.qualifying_pairs);
    assert_eq!(a.cond_strong2.pass, b.cond_strong2.pass);
    assert_eq!(a.cond_strong2.qualifying_pairs, b.cond_strong2.qualifying_pairs);
    assert_eq!(a.cond_absorbable.pass, b.cond_absorbable.pass);
    for (x, y) in [
        (a.d_min, b.d_min),
        (a.d_min1, b.d_min1),
        (a.close_mass, b.close_mass),
        (a.w_p0, b.w_p0),
        (a.cond_strong1.worst_ratio, b.cond_strong1.worst_ratio),
        (a.cond_conv.value, b.cond_conv.value),
        (a.cond_wp.value, b.cond_wp.value),
        (a.cond_strong2.worst_value, b.cond_strong2.worst_value),
        (a.cond_absorbable.lhs, b.cond_absorbable.lhs),
    ] {
        assert!(close(x, y), "{x} vs {y}");
    }
}

fn permuted(c: &ParticleConfig, seed: u64) -> ParticleConfig {
    let mut perm: Vec<usize> = (0..c.n()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pos = perm.iter().flat_map(|&i| c.point(i).to_vec()).collect();
    ParticleConfig::new(c.dim, pos, c.time).unwrap()
}

fn shifted(pos: &[f64], dim: usize, shift: &[f64]) -> Vec<f64> {
    pos.iter().enumerate().map(|(k, v)| v + shift[k % dim]).collect()
}

#[test]
fn assumptions_are_permutation_and_translation_invariant() {
    let density = DensitySpec::uniform_cube(2).unwrap();
    let kernel = KernelSpec::power_law(2, 0.25).unwrap();
    let th = Thresholds::default();
    for (n, m, method) in [(60, 240, WpMethod::Exact), (400, 6400, WpMethod::LowerBound)] {
        for seed in 0..4 {
            let c = sample_config(&density, n, seed).unwrap();
            let r = sample_config(&density, m, 1000 + seed).unwrap();
            let reference = PointCloud::from_config(&r);
            let dn = select_delta(n, 2, 0.02);
            let base = check_assumptions(&c, &reference, &kernel, dn, 2.0, &th, method, 5).unwrap();

            let p = check_assumptions(&permuted(&c, seed), &reference, &kernel, dn, 2.0, &th, method, 5).unwrap();
            same_report(&base, &p);

            let shift = [3.25, -1.5];
            let ct = ParticleConfig::new(2, shifted(&c.positions, 2, &shift), 0.0).unwrap();
            let rt = PointCloud::uniform(2, shifted(&reference.points, 2, &shift)).unwrap();
            let t = check_assumptions(&ct, &rt, &kernel, dn, 2.0, &th, method, 5).unwrap();
            same_report(&base, &t);
        }
    }
}

fn synthetic(c0: &ParticleConfig, rate: f64, times: &[f64]) -> Trajectory {
    let k = KernelSpec::zero(c0.dim);
    let mut t = simulate(c0, &k, 1.0, &IntegratorControls::default()).unwrap();
    t.sample_times = times.to_vec();
    t.configs = times
        .iter()
        .map(|&s| {
            let f = (-rate * s).exp();
            ParticleConfig::new(c0.dim, c0.positions.iter().map(|v| v * f).collect(), s).unwrap()
        })
        .collect();
    t.diagnostics.clear();
    t
}

#[test]
fn fitted_c_dist_recovers_contraction_rate() {
    let c0 = sample_config(&DensitySpec::uniform_cube(2).unwrap(), 50, 3).unwrap();
    let t = synthetic(&c0, 3.0, &[0.0, 0.25, 0.5, 1.0]);
    assert!((fitted_c_dist(&t) - 3.0).abs() <= 1e-9);
}

#[test]
fn fitted_c_dist_vanishes_for_repulsive_pair() {
    let c0 = ParticleConfig::from_rows(&[vec![0.0, 0.0], vec![0.3, 0.1]], 0.0).unwrap();
    for alpha in [0.3, 1.0] {
        let t = simulate(&c0, &KernelSpec::power_law(2, alpha).unwrap(), 1.0, &IntegratorControls::default()).unwrap();
        assert_eq!(fitted_c_dist(&t), 0.0);
    }
}

#[test]
fn cutoff_bound_lhs_nonincreasing_in_delta() {
    let density = DensitySpec::uniform_cube(2).unwrap();
    let c = sample_config(&density, 300, 4).unwrap();
    let r = PointCloud::from_config(&sample_config(&density, 1200, 5).unwrap());
    let mut last = f64::INFINITY;
    for delta in [0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 2.0] {
        let rep = check_cutoff_bound(&c, &r, 1.3, delta, 2.0, 1.0, WpMethod::LowerBound, 0).unwrap();
        assert!(rep.lhs <= last);
        last = rep.lhs;
    }
    assert_eq!(last, 0.0);
}

proptest! {
    #[test]
    fn select_delta_decreasing(n in 2usize..100_000, d in 2usize..4, eps in 0.0f64..0.5) {
        prop_assert!(select_delta(n + 1, d, eps) < select_delta(n, d, eps));
        prop_assert!(select_delta(n, d, eps + 0.01) < select_delta(n, d, eps));
    }

    #[test]
    fn infinite_p_is_the_limit(
        n in 10usize..10_000,
        alpha in 0.05f64..0.3,
        w in 1e-3f64..0.5,
        mass in 0.0f64..1.0,
        dmin in 1e-4f64..1e-1,
    ) {
        let dn = select_delta(n, 2, 0.02);
        let (a, b) = wp_condition_terms(n, 2, alpha, 1e7, dn, w, mass, dmin);
        let (ai, bi) = wp_condition_terms(n, 2, alpha, f64::INFINITY, dn, w, mass, dmin);
        prop_assert!((a - ai).abs() <= 1e-4 * ai);
        if mass > 1e-3 {
            prop_assert!((b - bi).abs() <= 1e-4 * bi.max(1e-300));
        }
    }
}
