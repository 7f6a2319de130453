//! Compensated accumulation used wherever a sum has to be reproducible
//! bit for bit across runs and thread counts.

/// Kahan-Babuska (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        // branch-free two-sum; the rounding error it recovers is exact
        let t = self.sum + x;
        let bv = t - self.sum;
        self.comp += (self.sum - (t - bv)) + (x - bv);
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a sequence, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Compensated::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn many_small_terms() {
        let s = compensated_sum(std::iter::repeat(0.1).take(10_000));
        assert!((s - 1000.0).abs() < 1e-12);
    }
}
