//! Brute-force references for the distance statistics.

#![allow(dead_code)]

use chaoslab_core::config_stats::{CutoffSums, DistanceReport, ParticleConfig};
use chaoslab_core::summation::Compensated;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(c: &ParticleConfig, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for (x, y) in c.point(i).iter().zip(c.point(j)) {
        let t = x - y;
        s += t * t;
    }
    s.sqrt()
}

/// Quadratic scan, ties to the smallest index.
pub fn distance_report(c: &ParticleConfig, delta: f64) -> DistanceReport {
    let n = c.n();
    let mut nn_index = vec![0; n];
    let mut nn_dist = vec![f64::INFINITY; n];
    let mut second_dist = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in 0..n {
            if j != i && dist(c, i, j) < nn_dist[i] {
                nn_dist[i] = dist(c, i, j);
                nn_index[i] = j;
            }
        }
        for j in 0..n {
            if j != i && j != nn_index[i] {
                second_dist[i] = second_dist[i].min(dist(c, i, j));
            }
        }
    }
    let d_min = nn_dist.iter().copied().fold(f64::INFINITY, f64::min);
    let d_min1 = second_dist.iter().copied().fold(f64::INFINITY, f64::min);
    let close_set: Vec<usize> = (0..n).filter(|&i| nn_dist[i] < delta).collect();
    let close_mass = close_set.len() as f64 / n as f64;
    DistanceReport {
        d_min,
        nn_index,
        nn_dist,
        d_min1,
        d_min1_defined: n >= 3,
        second_dist,
        delta,
        close_set,
        close_mass,
    }
}

pub fn cutoff_sum(c: &ParticleConfig, beta: f64, delta: f64) -> CutoffSums {
    let n = c.n();
    let per_particle: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = Compensated::new();
            for j in 0..n {
                let d = dist(c, i, j);
                if j != i && d > delta {
                    acc.add(d.powf(-beta));
                }
            }
            acc.value()
        })
        .collect();
    let max = per_particle.iter().copied().fold(0.0, f64::max);
    CutoffSums { per_particle, max }
}

/// Random configuration; every third one lives on a coarse integer lattice
/// so that distance ties (and coincident points) occur.
pub fn random_config(rng: &mut ChaCha8Rng, n: usize, dim: usize, lattice: bool) -> ParticleConfig {
    let pos: Vec<f64> = (0..n * dim)
        .map(|_| if lattice { rng.gen_range(0..12) as f64 } else { rng.gen::<f64>() * 3.0 - 1.0 })
        .collect();
    ParticleConfig::new(dim, pos, 0.0).unwrap()
}

pub fn config_stream(seed: u64, count: usize, n_max: usize) -> Vec<ParticleConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(2..=n_max);
            let dim = 1 + k % 3;
            random_config(&mut rng, n, dim, k % 3 == 2)
        })
        .collect()
}
