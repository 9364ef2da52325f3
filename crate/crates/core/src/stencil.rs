//! Fourth-order central difference weights on a uniform grid.
//!
//! The weights are exponentially fitted: besides low-degree polynomials they
//! differentiate `e^ρ` and `e^-ρ` exactly. Calabi profiles behave like
//! `c·e^ρ` near the zero section and `b - c·e^-ρ` near the infinity divisor, so
//! the fitted weights leave no truncation error in the leading asymptotic
//! terms. As `h → 0` the weights converge to the classical ones and the
//! truncation order stays four.

/// Number of ghost nodes needed on each side by the widest stencil.
pub const GHOSTS: usize = 3;

/// `Σ_{j ≥ start, j odd} x^j / j!`, summed without cancellation.
fn sinh_tail(x: f64, start: u32) -> f64 {
    series_tail(x, start)
}

/// `Σ_{j ≥ start, j even} x^j / j!`.
fn cosh_tail(x: f64, start: u32) -> f64 {
    series_tail(x, start)
}

fn series_tail(x: f64, start: u32) -> f64 {
    let mut term = 1.0;
    for j in 1..=start {
        term *= x / j as f64;
    }
    let mut sum = term;
    let mut j = start;
    loop {
        term *= x * x / (((j + 1) * (j + 2)) as f64);
        j += 2;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || j > 200 {
            break;
        }
    }
    sum
}

/// Weights of the first three derivative stencils for spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencils {
    pub h: f64,
    /// First derivative: `c1 (f₁ − f₋₁) + c2 (f₂ − f₋₂)`.
    pub d1: [f64; 2],
    /// Second derivative: `c0 f₀ + c1 (f₁ + f₋₁) + c2 (f₂ + f₋₂)`.
    pub d2: [f64; 3],
    /// Third derivative: `Σ c_k (f_k − f₋k)`, k = 1..3.
    pub d3: [f64; 3],
}

impl Stencils {
    pub fn new(h: f64) -> Self {
        // first derivative: exact for ρ and sinh ρ
        let s1 = sinh_tail(h, 3);
        let s2 = sinh_tail(2.0 * h, 3);
        let r = s2 / s1;
        let c2 = 1.0 / (2.0 * h * (2.0 - r));
        let d1 = [-c2 * r, c2];

        // second derivative: exact for 1, ρ², cosh ρ
        let k1 = cosh_tail(h, 4);
        let k2 = cosh_tail(2.0 * h, 4);
        let r = k2 / k1;
        let c2 = 1.0 / (h * h * (4.0 - r));
        let c1 = -c2 * r;
        let d2 = [-2.0 * (c1 + c2), c1, c2];

        // third derivative: exact for ρ, ρ³, sinh ρ
        let t1 = sinh_tail(h, 5);
        let t2 = sinh_tail(2.0 * h, 5) / t1;
        let t3 = sinh_tail(3.0 * h, 5) / t1;
        // rows: [1 2 3 | 0], [1 8 27 | 3/h³], [1 t2 t3 | 0]
        // eliminate c1 with the first row
        let (a11, a12, r1) = (6.0, 24.0, 3.0 / (h * h * h));
        let (a21, a22) = (t2 - 2.0, t3 - 3.0);
        let det = a11 * a22 - a12 * a21;
        let c2 = r1 * a22 / det;
        let c3 = -r1 * a21 / det;
        let c1 = -2.0 * c2 - 3.0 * c3;
        let d3 = [c1, c2, c3];

        Stencils { h, d1, d2, d3 }
    }

    /// Classical (polynomial) fourth-order weights, for comparison.
    pub fn classical(h: f64) -> Self {
        Stencils {
            h,
            d1: [8.0 / (12.0 * h), -1.0 / (12.0 * h)],
            d2: [
                -30.0 / (12.0 * h * h),
                16.0 / (12.0 * h * h),
                -1.0 / (12.0 * h * h),
            ],
            d3: [
                -13.0 / (8.0 * h.powi(3)),
                1.0 / h.powi(3),
                -1.0 / (8.0 * h.powi(3)),
            ],
        }
    }

    /// Derivatives 1..3 at position `i` of a ghost-extended array.
    #[inline]
    pub fn apply(&self, f: &[f64], i: usize) -> [f64; 3] {
        let [a1, a2] = self.d1;
        let [b0, b1, b2] = self.d2;
        let [e1, e2, e3] = self.d3;
        let (m1, p1) = (f[i - 1], f[i + 1]);
        let (m2, p2) = (f[i - 2], f[i + 2]);
        let (m3, p3) = (f[i - 3], f[i + 3]);
        [
            a1 * (p1 - m1) + a2 * (p2 - m2),
            b0 * f[i] + b1 * (p1 + m1) + b2 * (p2 + m2),
            e1 * (p1 - m1) + e2 * (p2 - m2) + e3 * (p3 - m3),
        ]
    }
}

/// Extend `values` by [`GHOSTS`] nodes on each side using linear extrapolation
/// from the two outermost nodes. Exact for affine data.
pub fn extend_linear(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n + 2 * GHOSTS);
    let lo = values[1] - values[0];
    let hi = values[n - 1] - values[n - 2];
    for k in (1..=GHOSTS).rev() {
        out.push(values[0] - k as f64 * lo);
    }
    out.extend_from_slice(values);
    for k in 1..=GHOSTS {
        out.push(values[n - 1] + k as f64 * hi);
    }
    out
}

/// First and second derivatives of a generic nodal field (linear ghost closure).
pub fn field_derivatives(values: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let st = Stencils::new(h);
    let ext = extend_linear(values);
    let mut d1 = Vec::with_capacity(values.len());
    let mut d2 = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let [a, b, _] = st.apply(&ext, i + GHOSTS);
        d1.push(a);
        d2.push(b);
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_weights_approach_classical() {
        let h = 1e-3;
        let f = Stencils::new(h);
        let c = Stencils::classical(h);
        for k in 0..2 {
            assert!((f.d1[k] / c.d1[k] - 1.0).abs() < 1e-6);
        }
        for k in 0..3 {
            assert!((f.d2[k] / c.d2[k] - 1.0).abs() < 1e-6);
            assert!((f.d3[k] / c.d3[k] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_on_exponentials_and_cubics() {
        let h = 0.05;
        let st = Stencils::new(h);
        let x0 = 0.3;
        let sample = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            (-3..=3).map(|k| f(x0 + k as f64 * h)).collect()
        };
        let e = st.apply(&sample(&|x: f64| x.exp()), 3);
        for d in e {
            assert!((d / x0.exp() - 1.0).abs() < 1e-11, "{d}");
        }
        let e = st.apply(&sample(&|x: f64| (-x).exp()), 3);
        assert!((e[0] + (-x0).exp()).abs() < 1e-11);
        assert!((e[1] - (-x0).exp()).abs() < 1e-11);
        assert!((e[2] + (-x0).exp()).abs() < 1e-11);
        let e = st.apply(&sample(&|x: f64| x * x * x), 3);
        assert!((e[2] - 6.0).abs() < 1e-8);
        assert!((e[1] - 6.0 * x0).abs() < 1e-9);
    }
}
