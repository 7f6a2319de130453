//! Small statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn wilson(successes: usize, trials: usize) -> Self {
        assert!(successes <= trials, "successes exceed trials");
        if trials == 0 {
            return Self { successes, trials, estimate: 0.0, ci_low: 0.0, ci_high: 1.0 };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            estimate: p,
            ci_low: (center - half).max(0.0).min(p),
            ci_high: (center + half).min(1.0).max(p),
        }
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// Whether the two Wilson intervals intersect.
    pub fn overlaps(&self, other: &Proportion) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (NaN with fewer than three points).
    pub slope_se: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2, "need at least two points for a line fit");
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let slope_se = if n > 2 && sxx > 0.0 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit { slope, intercept, slope_se }
}

/// Median of a sample (mean of the two central values for even length).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for &(k, n) in &[(0, 10), (10, 10), (3, 10), (50, 200), (1, 1000)] {
            let p = Proportion::wilson(k, n);
            assert!(p.ci_low <= p.estimate && p.estimate <= p.ci_high);
            assert!(p.ci_low >= 0.0 && p.ci_high <= 1.0);
        }
    }

    #[test]
    fn wilson_known_value() {
        // 5/10: center 0.5, half-width z*sqrt(0.025 + z^2/400)/(1 + z^2/10).
        let p = Proportion::wilson(5, 10);
        assert!((p.ci_low - 0.236_593).abs() < 1e-5, "{}", p.ci_low);
        assert!((p.ci_high - 0.763_407).abs() < 1e-5, "{}", p.ci_high);
    }

    #[test]
    fn wilson_shrinks_like_inverse_sqrt() {
        let a = Proportion::wilson(30, 100);
        let b = Proportion::wilson(120, 400);
        let ratio = a.width() / b.width();
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.5).abs() < 1e-14);
        assert!(f.slope_se.abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
