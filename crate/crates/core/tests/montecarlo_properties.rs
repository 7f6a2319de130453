mod common;

use chaoslab_core::montecarlo::{
    estimate_close_pairs_tail, estimate_dmin_tail, estimate_triple_event, estimate_triple_proximity,
    sample_config, triple_event, triple_event_brute, DeltaRule, DensitySpec, MCReport,
};
use common::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn triple_event_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut yes, mut no) = (0, 0);
    for k in 0..100 {
        let n = rng.gen_range(3..=200);
        let dim = 2 + k % 2;
        let c = oracle::random_config(&mut rng, n, dim, k % 5 == 4);
        let scale = c.bbox_diagonal();
        let beta = [0.5, 1.0, 1.5][k % 3];
        let eps = rng.gen_range(0.05..0.95);
        let delta = scale * rng.gen_range(0.0..0.3);
        let fast = triple_event(&c, beta, eps, delta);
        assert_eq!(fast, triple_event_brute(&c, beta, eps, delta), "config {k}");
        if fast {
            yes += 1
        } else {
            no += 1
        }
    }
    assert!(yes >= 10 && no >= 10, "{yes} events, {no} non-events");
}

#[test]
fn uniform_cube_passes_chi_square() {
    // 20 bins, 19 degrees of freedom: the 0.999 quantile is 43.82
    const CRIT: f64 = 43.82;
    let density = DensitySpec::uniform_cube(3).unwrap();
    let (n, r) = (1000, 100);
    let mut counts = vec![[0usize; 20]; 3];
    for rep in 0..r {
        let c = sample_config(&density, n, 7000 + rep).unwrap();
        for p in c.positions.chunks(3) {
            for (k, v) in p.iter().enumerate() {
                counts[k][((v * 20.0) as usize).min(19)] += 1;
            }
        }
    }
    let expected = (n * r as usize) as f64 / 20.0;
    for (k, c) in counts.iter().enumerate() {
        let chi2: f64 = c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CRIT, "coordinate {k}: chi2 = {chi2}");
    }
}

fn check_ranges(r: &MCReport) {
    for row in &r.rows {
        if let Some(p) = row.proportion {
            assert!((0.0..=1.0).contains(&p.estimate));
            assert!(p.ci_low <= p.estimate && p.estimate <= p.ci_high);
        }
    }
}

#[test]
fn wilson_intervals_shrink_like_inverse_sqrt_replicas() {
    let density = DensitySpec::uniform_cube(2).unwrap();
    let small = estimate_dmin_tail(&density, &[300], &[2.0], 100, 1).unwrap();
    let large = estimate_dmin_tail(&density, &[300], &[2.0], 400, 1).unwrap();
    check_ranges(&small);
    check_ranges(&large);
    let ratio = large.rows[0].proportion.unwrap().width() / small.rows[0].proportion.unwrap().width();
    assert!((0.35..=0.65).contains(&ratio), "width ratio {ratio}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let density = DensitySpec::sine_warp(2, 0.1).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let a = estimate_triple_event(&density, &[200, 400], 0.8, 0.2, DeltaRule::Power(0.6), 40, 9).unwrap();
            let b = estimate_close_pairs_tail(&density, &[300], &[0.2, 0.5], 0.1, 40, 9).unwrap();
            (serde_json::to_string(&a).unwrap() + &a.raw_csv(), serde_json::to_string(&b).unwrap() + &b.raw_csv())
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn close_pair_fraction_scales_like_delta_to_the_d() {
    for dim in [2usize, 3] {
        let density = DensitySpec::uniform_cube(dim).unwrap();
        let r = estimate_close_pairs_tail(&density, &[2000], &[0.1, 0.2], 0.5, 30, 2).unwrap();
        check_ranges(&r);
        let f = |k: usize| r.rows[k].stats["mean_fraction"];
        let ratio = f(1) / f(0);
        let target = 2f64.powi(dim as i32);
        assert!(ratio >= target / 2.0 && ratio <= target * 2.0, "d={dim}: ratio {ratio}");
    }
}

#[test]
fn triple_proximity_scales_like_l1_to_the_d() {
    let density = DensitySpec::uniform_cube(2).unwrap();
    let n = 400usize;
    // small-probability regime: N^3 L1^d L2^d around 0.05
    let l2 = 4.0 / n as f64;
    let r = estimate_triple_proximity(&density, &[n], &[0.5 / n as f64, 1.0 / n as f64], l2, 4000, 3).unwrap();
    check_ranges(&r);
    let (a, b) = (r.rows[0].proportion.unwrap().estimate, r.rows[1].proportion.unwrap().estimate);
    assert!(a > 0.0);
    let ratio = b / a;
    assert!((2.0..=8.0).contains(&ratio), "ratio {ratio} ({a} -> {b})");
}
