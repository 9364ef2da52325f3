//! Shrinking Kähler–Ricci solitons with Calabi symmetry on the total space of
//! `L^(m+1) → Z`, in the momentum chart.
//!
//! With `x = φ′` and `w(x) = φ″`, a radial soliton with holomorphy potential
//! `c·φ′` satisfies `φ′ − u′ = c φ″`, which is the linear equation
//!
//! ```text
//! w′ + m w/x + n w/(a+x) − c w = (m+1) − x
//! ```
//!
//! Its solution regular at the zero section is
//! `w = e^{cx} x^{−m} (a+x)^{−n} ∫₀ˣ sᵐ (a+s)ⁿ e^{−cs} ((m+1) − s) ds`.
//! The solution is positive and asymptotically conical exactly when the full
//! integral `I(c)` vanishes, which selects `c*`. Everything here is evaluated in
//! closed form: a power series near `x = 0` and, using `I(c*) = 0`, a finite
//! sum of Gamma integrals of the tail elsewhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{BundleConfig, Grid, Profile};

/// Below this the head series is used, above it the tail sum.
const SWITCH_X: f64 = 1.0;

/// Coefficients of `(a + y)ⁿ` in powers of `y`.
fn binomial_row(n: u32, a: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(n as usize + 1);
    let mut binom = 1.0;
    for k in 0..=n {
        c.push(binom * a.powi((n - k) as i32));
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    c
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn check_params(config: &BundleConfig, a: f64, c: f64) -> Result<()> {
    config.validate()?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::input("a", "must be positive"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::input("c", "must be positive"));
    }
    Ok(())
}

/// The terms of `I(c)`; their sum is `I(c)` and their absolute sum its scale.
fn shooting_terms(m: u32, n: u32, a: f64, c: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (k, coef) in binomial_row(n, a).into_iter().enumerate() {
        let j = m + k as u32;
        // ∫ s^j e^{−cs} = j!/c^{j+1}
        out.push(coef * f64::from(m + 1) * factorial(j) / c.powi(j as i32 + 1));
        out.push(-coef * factorial(j + 1) / c.powi(j as i32 + 2));
    }
    out
}

/// `I(c) = ∫₀^∞ sᵐ (a+s)ⁿ e^{−cs} ((m+1) − s) ds` in closed form.
pub fn shooting_integral(config: &BundleConfig, a: f64, c: f64) -> Result<f64> {
    check_params(config, a, c)?;
    Ok(shooting_terms(config.m, config.n, a, c).iter().sum())
}

/// `(I(c), Σ|terms|)`.
fn shooting_with_scale(m: u32, n: u32, a: f64, c: f64) -> (f64, f64) {
    let t = shooting_terms(m, n, a, c);
    (t.iter().sum(), t.iter().map(|v| v.abs()).sum())
}

/// Sign change of `I` bracketing the soliton constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

/// Bracket of `c*` found by halving/doubling from `c = 1`.
pub fn bracket_c_star(config: &BundleConfig, a: f64) -> Result<Bracket> {
    check_params(config, a, 1.0)?;
    let i = |c: f64| shooting_with_scale(config.m, config.n, a, c).0;
    let mut lo = 1.0;
    let mut hi = 1.0;
    if i(1.0) > 0.0 {
        while i(lo) > 0.0 {
            lo *= 0.5;
            if lo < 1e-6 {
                return Err(Error::BracketError);
            }
        }
        hi = 2.0 * lo;
    } else {
        while !(i(hi) > 0.0) {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::BracketError);
            }
        }
        lo = 0.5 * hi;
    }
    Ok(Bracket { lo, hi })
}

/// The unique positive root `c*` of the shooting integral, by bisection.
pub fn solve_c_star(config: &BundleConfig, a: f64) -> Result<f64> {
    let Bracket { mut lo, mut hi } = bracket_c_star(config, a)?;
    let i = |c: f64| shooting_with_scale(config.m, config.n, a, c).0;
    // I < 0 at lo, I > 0 at hi
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if i(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (ilo, ihi) = (i(lo).abs(), i(hi).abs());
    Ok(if ilo <= ihi { lo } else { hi })
}

/// `e^{cx}∫₀ˣ sʲ e^{−cs} ds = Σ_{i>j} j! c^{i−j−1} xⁱ / i!` (all terms positive).
fn head_moment(j: u32, c: f64, x: f64) -> f64 {
    let mut term = x.powi(j as i32 + 1) / f64::from(j + 1);
    let mut sum = term;
    let mut i = j + 1;
    loop {
        term *= c * x / f64::from(i + 1);
        i += 1;
        sum += term;
        if term <= 1e-17 * sum || i > 2000 {
            break;
        }
    }
    sum
}

/// `e^{cx} ∫₀ˣ sᵐ(a+s)ⁿ e^{−cs}((m+1) − s) ds` by the head series.
fn head(m: u32, n: u32, a: f64, c: f64, x: f64) -> f64 {
    binomial_row(n, a)
        .iter()
        .enumerate()
        .map(|(k, coef)| {
            let j = m + k as u32;
            coef * (f64::from(m + 1) * head_moment(j, c, x) - head_moment(j + 1, c, x))
        })
        .sum()
}

/// `e^{cx} ∫ₓ^∞ sᵐ(a+s)ⁿ e^{−cs}(s − (m+1)) ds` as a Gamma-integral sum.
fn tail(m: u32, n: u32, a: f64, c: f64, x: f64) -> f64 {
    // polynomial in τ of (x+τ)^m (a+x+τ)^n (x+τ−(m+1))
    let mut poly = vec![1.0];
    let mul = |p: &[f64], c0: f64| -> Vec<f64> {
        let mut out = vec![0.0; p.len() + 1];
        for (i, v) in p.iter().enumerate() {
            out[i] += v * c0;
            out[i + 1] += v;
        }
        out
    };
    for _ in 0..m {
        poly = mul(&poly, x);
    }
    for _ in 0..n {
        poly = mul(&poly, a + x);
    }
    poly = mul(&poly, x - f64::from(m + 1));
    // ∫₀^∞ τ^j e^{−cτ} dτ = j!/c^{j+1}
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (j, p) in poly.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        sum += p * fact / c.powi(j as i32 + 1);
    }
    sum
}

/// The regular solution `w_c(x)` for an arbitrary `c` (not only `c*`).
///
/// Uses `∫₀ˣ = I(c) − ∫ₓ^∞`; away from the root the `e^{cx} I(c)` part makes
/// `w` blow up (`I > 0`) or turn negative (`I < 0`).
pub fn shoot(config: &BundleConfig, a: f64, c: f64, x: f64) -> Result<f64> {
    check_params(config, a, c)?;
    let (m, n) = (config.m, config.n);
    let (i, scale) = shooting_with_scale(m, n, a, c);
    let i = if i.abs() <= 1e-12 * scale { 0.0 } else { i };
    Ok(w_value(m, n, a, c, i, x))
}

fn w_value(m: u32, n: u32, a: f64, c: f64, i: f64, x: f64) -> f64 {
    let weight = x.powi(m as i32) * (a + x).powi(n as i32);
    if x < SWITCH_X {
        head(m, n, a, c, x) / weight
    } else {
        let growth = if i == 0.0 { 0.0 } else { (c * x).exp() * i };
        (growth + tail(m, n, a, c, x)) / weight
    }
}

/// A soliton sampled in the momentum chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub m: u32,
    pub n: u32,
    pub a: f64,
    pub c_star: f64,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl SolitonProfile {
    /// `w(x)` for any `x > 0`, in closed form.
    pub fn eval(&self, x: f64) -> f64 {
        w_value(self.m, self.n, self.a, self.c_star, 0.0, x)
    }

    /// `w′(x)` from the soliton equation.
    pub fn slope(&self, x: f64) -> f64 {
        let (m, n) = (f64::from(self.m), f64::from(self.n));
        let w = self.eval(x);
        (m + 1.0) - x - m * w / x - n * w / (self.a + x) + self.c_star * w
    }

    /// ODE residual at `x`, with `w′` by a sixth-order central difference of
    /// [`SolitonProfile::eval`] (independent of the equation itself).
    pub fn residual(&self, x: f64) -> f64 {
        let (m, n) = (f64::from(self.m), f64::from(self.n));
        let d = 0.01 * x;
        let f = |k: f64| self.eval(x + k * d);
        let dw = (45.0 * (f(1.0) - f(-1.0)) - 9.0 * (f(2.0) - f(-2.0)) + (f(3.0) - f(-3.0)))
            / (60.0 * d);
        let w = self.eval(x);
        dw + m * w / x + n * w / (self.a + x) - self.c_star * w - (m + 1.0) + x
    }

    /// Large-x slope estimate `w(x_max)/x_max`, which tends to `1/c*`.
    pub fn asymptotic_slope(&self) -> f64 {
        let k = self.x.len() - 1;
        self.w[k] / self.x[k]
    }

    /// `w″(x)`, differentiating the soliton equation once more.
    pub fn curvature(&self, x: f64) -> f64 {
        let (m, n, a) = (f64::from(self.m), f64::from(self.n), self.a);
        let w = self.eval(x);
        let dw = self.slope(x);
        -1.0 - m * (dw / x - w / (x * x)) - n * (dw / (a + x) - w / ((a + x) * (a + x)))
            + self.c_star * dw
    }

    /// Integrate `dφ′/dρ = w(φ′)` on `grid` with `φ′(0) = x0` by RK4.
    ///
    /// The soliton lives on a noncompact space, so `b` is only a placeholder
    /// upper bound that must exceed the largest φ′. The higher derivatives are
    /// the exact ones implied by the equation (`φ‴ = w w′`, `φ⁗ = w(w′² + w w″)`);
    /// the compact closures of [`crate::profile::differentiate`] do not apply.
    pub fn to_profile(&self, grid: Grid, b: f64, x0: f64) -> Result<Profile> {
        let len = grid.len();
        let k0 = grid.anchor();
        let sub = 16;
        let dh = grid.h / sub as f64;
        let f = |x: f64| self.eval(x);
        let rk4 = |x: f64, step: f64| {
            let k1 = f(x);
            let k2 = f(x + 0.5 * step * k1);
            let k3 = f(x + 0.5 * step * k2);
            let k4 = f(x + step * k3);
            x + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        let mut p = vec![0.0; len];
        p[k0] = x0;
        for i in k0 + 1..len {
            p[i] = (0..sub).fold(p[i - 1], |x, _| rk4(x, dh));
        }
        for i in (0..k0).rev() {
            p[i] = (0..sub).fold(p[i + 1], |x, _| rk4(x, -dh));
        }
        if let Some(i) = p.iter().position(|x| !(*x > 0.0 && *x < b)) {
            return Err(Error::ConeViolation {
                node: i,
                rho: grid.rho[i],
                what: format!("soliton momentum {:e} outside (0, {b})", p[i]),
            });
        }
        let mut profile = Profile::from_dphi(grid, b, 0.0, p);
        for i in 0..len {
            let x = profile.dphi[i];
            let (w, dw, d2w) = (self.eval(x), self.slope(x), self.curvature(x));
            profile.d2phi[i] = w;
            profile.d3phi[i] = w * dw;
            profile.d4phi[i] = w * (dw * dw + w * d2w);
        }
        Ok(profile)
    }
}

/// Sample the soliton on `count` log-spaced points in `[1e−6, x_max]`.
///
/// `c` should be the root from [`solve_c_star`]; any other value shows up as
/// [`Error::PositivityLoss`] or a blow-up.
pub fn soliton_profile(
    config: &BundleConfig,
    a: f64,
    c: f64,
    x_max: f64,
    count: usize,
) -> Result<SolitonProfile> {
    check_params(config, a, c)?;
    if !(x_max > 1e-6 && x_max.is_finite()) {
        return Err(Error::input("x_max", "must exceed 1e-6"));
    }
    if count < 2 {
        return Err(Error::input("count", "must be at least 2"));
    }
    let (m, n) = (config.m, config.n);
    let (i, scale) = shooting_with_scale(m, n, a, c);
    let i = if i.abs() <= 1e-12 * scale { 0.0 } else { i };
    let (l0, l1) = (1e-6f64.ln(), x_max.ln());
    let mut x = Vec::with_capacity(count);
    let mut w = Vec::with_capacity(count);
    for k in 0..count {
        let xk = if k + 1 == count {
            x_max
        } else {
            (l0 + (l1 - l0) * k as f64 / (count - 1) as f64).exp()
        };
        let wk = w_value(m, n, a, c, i, xk);
        if !(wk > 0.0) || !wk.is_finite() {
            return Err(Error::PositivityLoss { x: xk });
        }
        x.push(xk);
        w.push(wk);
    }
    Ok(SolitonProfile {
        m,
        n,
        a,
        c_star: c,
        x,
        w,
    })
}

/// A flow snapshot in the momentum chart: `w(x) = φ̃″` where `φ̃′ = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumChart {
    pub rho: Vec<f64>,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    /// `dw/dx = φ‴/φ″` at the nodes.
    pub dw: Vec<f64>,
}

fn cubic_hermite(x0: f64, x1: f64, v0: f64, v1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * v1
        + (t3 - t2) * h * d1
}

impl MomentumChart {
    /// Range of `x` covered by the snapshot.
    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let k = self.x.partition_point(|v| *v <= x);
        Some(k.clamp(1, self.x.len() - 1) - 1)
    }

    /// `w(x)` by cubic Hermite interpolation with the exact node slopes.
    pub fn w_at(&self, x: f64) -> Option<f64> {
        let k = self.interval(x)?;
        Some(cubic_hermite(
            self.x[k],
            self.x[k + 1],
            self.w[k],
            self.w[k + 1],
            self.dw[k],
            self.dw[k + 1],
            x,
        ))
    }

    /// `ρ(x)`, the inverse reparametrization (`dρ/dx = 1/w`).
    pub fn rho_at(&self, x: f64) -> Option<f64> {
        let k = self.interval(x)?;
        Some(cubic_hermite(
            self.x[k],
            self.x[k + 1],
            self.rho[k],
            self.rho[k + 1],
            1.0 / self.w[k],
            1.0 / self.w[k + 1],
            x,
        ))
    }
}

/// Reparametrize a normalized snapshot by its momentum `x = φ̃′`.
///
/// Near `b`, φ̃′ can repeat to round-off; nodes that do not strictly increase
/// the momentum are skipped.
pub fn flow_to_momentum(profile: &Profile) -> Result<MomentumChart> {
    crate::profile::check_cone(profile)?;
    let mut chart = MomentumChart {
        rho: Vec::new(),
        x: Vec::new(),
        w: Vec::new(),
        dw: Vec::new(),
    };
    for i in 0..profile.len() {
        let x = profile.dphi[i];
        if chart.x.last().is_some_and(|last| x <= *last) {
            continue;
        }
        chart.rho.push(profile.grid.rho[i]);
        chart.x.push(x);
        chart.w.push(profile.d2phi[i]);
        chart.dw.push(profile.d3phi[i] / profile.d2phi[i]);
    }
    if chart.x.len() < 2 {
        return Err(Error::input(
            "profile",
            "momentum chart needs at least two distinct values",
        ));
    }
    Ok(chart)
}

/// `sup |w_flow − w_soliton|` over `samples` points evenly spaced in `[x_lo, x_hi]`.
///
/// Fails if the snapshot does not cover the interval.
pub fn momentum_discrepancy(
    chart: &MomentumChart,
    soliton: &SolitonProfile,
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for k in 0..samples {
        let x = x_lo + (x_hi - x_lo) * k as f64 / (samples - 1).max(1) as f64;
        let wf = chart.w_at(x).ok_or_else(|| {
            Error::input("x", format!("{x} outside the snapshot's momentum range"))
        })?;
        sup = sup.max((wf - soliton.eval(x)).abs());
    }
    Ok(sup)
}

/// `sup |w_1 − w_2|` between two snapshots on `[x_lo, x_hi]`.
pub fn momentum_difference(
    a: &MomentumChart,
    b: &MomentumChart,
    x_lo: f64,
    x_hi: f64,
    samples: usize,
) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for k in 0..samples {
        let x = x_lo + (x_hi - x_lo) * k as f64 / (samples - 1).max(1) as f64;
        let (wa, wb) = match (a.w_at(x), b.w_at(x)) {
            (Some(wa), Some(wb)) => (wa, wb),
            _ => {
                return Err(Error::input(
                    "x",
                    format!("{x} outside a snapshot's momentum range"),
                ))
            }
        };
        sup = sup.max((wa - wb).abs());
    }
    Ok(sup)
}
