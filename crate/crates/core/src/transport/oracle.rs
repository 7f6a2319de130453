//! Exhaustive search over permutations, for tests on tiny instances.

use super::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::neighbors::distance;

pub const MAX_ORACLE_SIZE: usize = 8;

/// Exact `W_p` between equal-size uniform clouds by enumerating all `m!`
/// matchings (Heap's algorithm). `p = inf` gives the bottleneck value.
pub fn brute_force_wasserstein(a: &PointCloud, b: &PointCloud, p: f64) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    let m = a.m();
    if m != b.m() || !a.is_uniform() || !b.is_uniform() {
        return Err(invalid("brute force needs equal-size uniform clouds"));
    }
    if m > MAX_ORACLE_SIZE {
        return Err(Error::TooLarge(m));
    }
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    let d: Vec<f64> = (0..m * m).map(|e| distance(a.point(e / m), b.point(e % m))).collect();
    let score = |perm: &[usize]| -> f64 {
        if p.is_infinite() {
            (0..m).map(|i| d[i * m + perm[i]]).fold(0.0, f64::max)
        } else {
            (0..m).map(|i| d[i * m + perm[i]].powf(p)).sum::<f64>()
        }
    };
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = score(&perm);
    let mut c = vec![0usize; m];
    let mut i = 1;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(score(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(if p.is_infinite() { best } else { (best / m as f64).powf(1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(dim: usize, pts: &[f64]) -> PointCloud {
        PointCloud::uniform(dim, pts.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let a = cloud(2, &[0.0, 0.0, 1.0, 0.0]);
        let b = cloud(2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((brute_force_wasserstein(&a, &b, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let one = cloud(3, &[1.0, 2.0, 3.0]);
        let other = cloud(3, &[1.0, 2.0, 5.0]);
        assert_eq!(brute_force_wasserstein(&one, &other, 1.0).unwrap(), 2.0);
        let x = cloud(1, &[0.0, 1.0, 2.0]);
        let y = cloud(1, &[0.5, 1.5, 2.5]);
        assert!((brute_force_wasserstein(&x, &y, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let big = cloud(1, &[0.0; 9]);
        assert_eq!(brute_force_wasserstein(&big, &big, 1.0), Err(Error::TooLarge(9)));
    }

    #[test]
    fn heap_visits_every_permutation() {
        // Only the reversal has zero cost.
        let a = cloud(1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let b = cloud(1, &[4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(brute_force_wasserstein(&a, &b, f64::INFINITY).unwrap(), 0.0);
    }
}
