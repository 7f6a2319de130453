use chaoslab_core::transport::{
    brute_force_wasserstein, wasserstein, wasserstein_inf, wasserstein_p,
    wasserstein_p_network_simplex, PointCloud,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> PointCloud {
    PointCloud::uniform(dim, (0..m * dim).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

#[test]
fn solvers_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let m = 1 + k % 7;
        let dim = 1 + k % 3;
        let p = [1.0, 2.0, f64::INFINITY][k % 3];
        let a = random_cloud(&mut rng, m, dim);
        let b = random_cloud(&mut rng, m, dim);
        let exact = brute_force_wasserstein(&a, &b, p).unwrap();
        let got = wasserstein(&a, &b, p).unwrap();
        assert!((got.value - exact).abs() <= 1e-12, "instance {k}: {} vs {exact}", got.value);
        assert!(got.optimal);
        if p.is_finite() {
            let ns = wasserstein_p_network_simplex(&a, &b, p).unwrap();
            assert!((ns.value - exact).abs() <= 1e-12, "instance {k}: ns {} vs {exact}", ns.value);
            assert!(ns.optimal);
        }
    }
}

#[test]
fn unequal_sizes_match_replicated_brute_force() {
    // A uniform m-cloud against a uniform km-cloud equals the assignment
    // between k copies of the first and the second.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (m, k) in [(1usize, 5usize), (2, 2), (2, 4), (3, 2), (4, 2)] {
        for &p in &[1.0, 2.0, 3.0] {
            let a = random_cloud(&mut rng, m, 2);
            let b = random_cloud(&mut rng, m * k, 2);
            let rep: Vec<f64> = (0..k).flat_map(|_| a.points.clone()).collect();
            let rep = PointCloud::uniform(2, rep).unwrap();
            let exact = brute_force_wasserstein(&rep, &b, p).unwrap();
            let got = wasserstein_p(&a, &b, p).unwrap();
            assert!((got.value - exact).abs() <= 1e-12, "{m}x{k} p={p}: {} vs {exact}", got.value);
            assert!(got.optimal);
            let got_rev = wasserstein_p(&b, &a, p).unwrap();
            assert!((got_rev.value - exact).abs() <= 1e-12);
        }
    }
}

#[test]
fn plan_marginals_and_value_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for &(m, n) in &[(30usize, 45usize), (64, 64), (17, 200)] {
        let a = random_cloud(&mut rng, m, 3);
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let b = PointCloud::weighted(3, (0..n * 3).map(|_| rng.gen::<f64>()).collect(), w).unwrap();
        let r = wasserstein_p(&a, &b, 2.0).unwrap();
        assert!(r.optimal);
        let mut row = vec![0.0; m];
        let mut col = vec![0.0; n];
        let mut cost = 0.0;
        for e in &r.plan {
            row[e.i] += e.mass;
            col[e.j] += e.mass;
            let d: f64 = (0..3).map(|k| (a.point(e.i)[k] - b.point(e.j)[k]).powi(2)).sum();
            cost += e.mass * d;
        }
        for (x, y) in row.iter().zip(&a.weights).chain(col.iter().zip(&b.weights)) {
            assert!((x - y).abs() <= 1e-10);
        }
        assert!((cost.sqrt() - r.value).abs() <= 1e-12);
        // a basic solution has at most m + n - 1 positive entries
        assert!(r.plan.len() < m + n);
    }
}

#[test]
fn network_simplex_agrees_with_assignment_at_moderate_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for &(dim, p) in &[(2usize, 2.0), (3, 1.0), (2, 9.5)] {
        let a = random_cloud(&mut rng, 80, dim);
        let b = random_cloud(&mut rng, 80, dim);
        let x = wasserstein_p(&a, &b, p).unwrap();
        let y = wasserstein_p_network_simplex(&a, &b, p).unwrap();
        assert!(x.optimal && y.optimal);
        assert!((x.value - y.value).abs() <= 1e-12 * x.value.max(1.0), "{} {}", x.value, y.value);
    }
}

#[test]
fn large_p_does_not_overflow() {
    let a = PointCloud::uniform(1, vec![0.0, 1e3]).unwrap();
    let b = PointCloud::uniform(1, vec![5e2, 2e3]).unwrap();
    let r = wasserstein_p(&a, &b, 400.0).unwrap();
    assert!(r.value.is_finite() && r.value > 0.0);
    let inf = wasserstein_inf(&a, &b).unwrap().value;
    assert!(r.value <= inf + 1e-9);
}

fn cloud_strategy(m: usize, dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, m * dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(
        (m, dim) in (1usize..6, 1usize..4),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cloud(&mut rng, m, dim);
        let b = random_cloud(&mut rng, m, dim);
        let c = random_cloud(&mut rng, m, dim);
        for p in [1.0, 2.0, f64::INFINITY] {
            let ab = wasserstein(&a, &b, p).unwrap().value;
            let ba = wasserstein(&b, &a, p).unwrap().value;
            let bc = wasserstein(&b, &c, p).unwrap().value;
            let ac = wasserstein(&a, &c, p).unwrap().value;
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-10);
        }
    }

    #[test]
    fn monotone_in_p_and_translation_invariant(
        pts in cloud_strategy(5, 2),
        other in cloud_strategy(5, 2),
        shift in proptest::collection::vec(-3.0f64..3.0, 2),
    ) {
        let a = PointCloud::uniform(2, pts.clone()).unwrap();
        let b = PointCloud::uniform(2, other.clone()).unwrap();
        let w1 = wasserstein(&a, &b, 1.0).unwrap().value;
        let w2 = wasserstein(&a, &b, 2.0).unwrap().value;
        let w3 = wasserstein(&a, &b, 3.0).unwrap().value;
        let wi = wasserstein(&a, &b, f64::INFINITY).unwrap().value;
        prop_assert!(w1 <= w2 + 1e-10 && w2 <= w3 + 1e-10 && w3 <= wi + 1e-10);
        let sa: Vec<f64> = pts.iter().enumerate().map(|(k, v)| v + shift[k % 2]).collect();
        let sb: Vec<f64> = other.iter().enumerate().map(|(k, v)| v + shift[k % 2]).collect();
        let a2 = PointCloud::uniform(2, sa).unwrap();
        let b2 = PointCloud::uniform(2, sb).unwrap();
        let w2s = wasserstein(&a2, &b2, 2.0).unwrap().value;
        prop_assert!((w2 - w2s).abs() <= 1e-12);
    }
}
