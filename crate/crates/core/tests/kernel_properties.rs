use chaoslab_core::kernels::{
    check_c_alpha, check_nonattractive, eval_kernel, FdStep, KernelSpec, ShellSampler,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect()).collect()
}

#[test]
fn parity_on_random_points() {
    let odd = [
        KernelSpec::power_law(2, 0.3).unwrap(),
        KernelSpec::power_law(3, 1.0).unwrap(),
        KernelSpec::power_law_custom(2, 0.5, vec![0.0, 1.0, -1.0, 0.0]).unwrap(),
    ];
    for k in &odd {
        for x in random_points(k.dimension, 1000, 1) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let (a, b) = (eval_kernel(k, &x).unwrap(), eval_kernel(k, &neg).unwrap());
            for (p, q) in a.iter().zip(&b) {
                assert!((p + q).abs() <= 1e-14 * norm(&a));
            }
        }
    }
    let even = KernelSpec::oseen_gravity([0.0, 0.0, -1.0]).unwrap();
    for x in random_points(3, 1000, 2) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (a, b) = (eval_kernel(&even, &x).unwrap(), eval_kernel(&even, &neg).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-14 * norm(&a));
        }
    }
}

#[test]
fn repulsive_sign_identity() {
    for (d, alpha) in [(2, 0.3), (3, 0.8), (3, 1.5)] {
        let k = KernelSpec::power_law(d, alpha).unwrap();
        for x in random_points(d, 1000, 3) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let (a, b) = (eval_kernel(&k, &x).unwrap(), eval_kernel(&k, &neg).unwrap());
            let s: f64 = (0..d).map(|i| (a[i] - b[i]) * x[i]).sum();
            let want = 2.0 * norm(&x).powf(1.0 - alpha);
            assert!((s - want).abs() <= 1e-12 * want, "{s} vs {want}");
        }
    }
}

#[test]
fn mollification_is_identity_outside_and_bounded_inside() {
    let eps = 0.3;
    for base in [KernelSpec::power_law(2, 0.5).unwrap(), KernelSpec::power_law(3, 1.2).unwrap()] {
        let m = base.mollify(eps).unwrap();
        let d = base.dimension;
        let boundary_sup = eval_kernel(&base, &{
            let mut e = vec![0.0; d];
            e[0] = eps;
            e
        })
        .map(|v| norm(&v))
        .unwrap();
        for x in random_points(d, 1000, 4) {
            let r = norm(&x);
            let km = eval_kernel(&m, &x).unwrap();
            if r >= eps {
                assert_eq!(km, eval_kernel(&base, &x).unwrap());
            } else {
                assert!(norm(&km) <= boundary_sup * (1.0 + 1e-14));
            }
        }
        // small points too
        for x in random_points(d, 200, 5) {
            let small: Vec<f64> = x.iter().map(|v| v * 0.05).collect();
            assert!(norm(&eval_kernel(&m, &small).unwrap()) <= boundary_sup * (1.0 + 1e-14));
        }
    }
}

#[test]
fn c_k_estimate_converges_under_step_halving() {
    for k in [KernelSpec::power_law(2, 0.3).unwrap(), KernelSpec::oseen_gravity([0.0, 0.0, 1.0]).unwrap()] {
        let d = k.dimension;
        let est = |h: f64| {
            let mut s = ShellSampler::new(d, 0.5, 2.0, 7);
            check_c_alpha(&k, &mut s, 2000, FdStep::Relative(h)).c_k_estimate
        };
        let (a, b) = (est(1e-3), est(5e-4));
        assert!(((a - b) / b).abs() < 0.01, "{a} vs {b}");
    }
}

#[test]
fn certificates() {
    let oseen = KernelSpec::oseen_gravity([0.3, -0.2, 1.0]).unwrap();
    let mut s = ShellSampler::new(3, 0.5, 2.0, 8);
    assert_eq!(check_nonattractive(&oseen, &mut s, 100_000).max_violation, 0.0);
    let mut s = ShellSampler::new(3, 0.5, 2.0, 9);
    assert!(check_c_alpha(&oseen, &mut s, 10_000, FdStep::Relative(1e-4)).max_div <= 1e-6);
    let attractive = KernelSpec::power_law_custom(2, 0.5, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
    let mut s = ShellSampler::new(2, 0.5, 2.0, 10);
    assert!(check_nonattractive(&attractive, &mut s, 1000).max_violation > 0.0);
}
