//! Ground cost `(|x - y| / D)^p`, normalised by an upper bound `D` on all
//! cross distances so every cost lies in `[0, 1]` whatever `p` is.

#[derive(Debug, Clone, Copy)]
enum Power {
    One,
    Two,
    Moderate(f64),
    /// `p > 8`: evaluated as `exp(p ln r)`.
    Large(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct CostFn<'a> {
    a: &'a [f64],
    b: &'a [f64],
    dim: usize,
    power: Power,
    inv_scale2: f64,
    scale: f64,
}

impl<'a> CostFn<'a> {
    pub fn new(a: &'a [f64], b: &'a [f64], dim: usize, p: f64) -> Self {
        let scale = union_bbox_diagonal(a, b, dim);
        let power = if p == 1.0 {
            Power::One
        } else if p == 2.0 {
            Power::Two
        } else if p <= 8.0 {
            Power::Moderate(p)
        } else {
            Power::Large(p)
        };
        let inv_scale2 = if scale > 0.0 { 1.0 / (scale * scale) } else { 0.0 };
        Self { a, b, dim, power, inv_scale2, scale }
    }

    /// The normalising length `D`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn max_cost(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        let x = &self.a[i * self.dim..(i + 1) * self.dim];
        let y = &self.b[j * self.dim..(j + 1) * self.dim];
        let mut r2 = 0.0;
        for k in 0..self.dim {
            let t = x[k] - y[k];
            r2 += t * t;
        }
        let r2 = (r2 * self.inv_scale2).min(1.0);
        match self.power {
            Power::One => r2.sqrt(),
            Power::Two => r2,
            Power::Moderate(p) => r2.powf(0.5 * p),
            Power::Large(p) => {
                if r2 == 0.0 {
                    0.0
                } else {
                    (0.5 * p * r2.ln()).exp()
                }
            }
        }
    }
}

fn union_bbox_diagonal(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in a.iter().skip(k).step_by(dim).chain(b.iter().skip(k).step_by(dim)) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        s += (hi - lo) * (hi - lo);
    }
    s.sqrt()
}
