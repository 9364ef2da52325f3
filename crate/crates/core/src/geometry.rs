//! Curvature, potentials, distances and volumes of a Calabi-symmetric metric.
//!
//! The metric is `(a + φ′) g_Z + φ′ g_{CP^m} + φ″ (dρ² + η²)`. Quantities that
//! divide by φ″ are only trustworthy where φ″ is well above the round-off
//! level of the stencils, so curvature-type fields come with a resolution
//! mask ([`resolved`]); suprema are taken over the masked nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{check_cone, BundleConfig, Profile};
use crate::stencil::field_derivatives;

/// Relative floor on φ″ (fraction of its maximum) defining resolved nodes.
pub const RESOLVED_FLOOR: f64 = 1e-4;

/// Tolerance of the two-formula curvature check with stencil derivatives.
pub const FORMULA_TOL: f64 = 1e-4;

/// Nodes where φ″ ≥ [`RESOLVED_FLOOR`] · max φ″.
pub fn resolved(profile: &Profile) -> Vec<bool> {
    let wmax = profile.d2phi.iter().cloned().fold(0.0, f64::max);
    profile
        .d2phi
        .iter()
        .map(|w| *w >= RESOLVED_FLOOR * wmax)
        .collect()
}

/// Ricci potential `u = −log((a+φ′)ⁿ (φ′)^m φ″) + (m+1)ρ` and its derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciPotential {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
}

pub fn ricci_potential(profile: &Profile, config: &BundleConfig, a: f64) -> Result<RicciPotential> {
    check_cone(profile)?;
    let (n, m) = (config.nf(), config.mf());
    let len = profile.len();
    let mut u = Vec::with_capacity(len);
    let mut du = Vec::with_capacity(len);
    for i in 0..len {
        let (p, w, w1) = (profile.dphi[i], profile.d2phi[i], profile.d3phi[i]);
        let rho = profile.grid.rho[i];
        u.push(-(n * (a + p).ln() + m * p.ln() + w.ln()) + (m + 1.0) * rho);
        // grouped so that the cancellation near the zero section is exact
        let lower = -(w1 - w) / w - m * (w - p) / p;
        du.push(lower - n * w / (a + p));
    }
    let (d2u, _) = field_derivatives(&du, profile.grid.h);
    Ok(RicciPotential { u, du, d2u })
}

/// Scalar curvature by both closed forms, with their discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarCurvature {
    /// `n(λ−m−1+u′)/(a+φ′) + m u′/φ′ + u″/φ″`.
    pub r: Vec<f64>,
    /// Expanded form in φ′..φ⁗.
    pub r_expanded: Vec<f64>,
    /// Largest relative discrepancy over resolved nodes.
    pub max_discrepancy: f64,
    pub worst_rho: f64,
    pub resolved: Vec<bool>,
}

impl ScalarCurvature {
    /// Supremum of |R| over resolved nodes.
    pub fn sup_abs(&self) -> f64 {
        masked_sup(&self.r, &self.resolved, f64::abs)
    }
}

/// Sup of `f(v)` over masked entries (0 for an empty mask).
pub fn masked_sup(values: &[f64], mask: &[bool], f: impl Fn(f64) -> f64) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, k)| **k)
        .map(|(v, _)| f(*v))
        .fold(0.0, f64::max)
}

/// Expanded scalar curvature at one node.
pub fn scalar_curvature_expanded(n: f64, m: f64, lambda: f64, a: f64, d: [f64; 4]) -> f64 {
    let [p, w, w1, w2] = d;
    let ap = a + p;
    -w2 / (w * w) + w1 * w1 / (w * w * w)
        - 2.0 * n * w1 / (ap * w)
        - 2.0 * m * w1 / (p * w)
        - 2.0 * m * n * w / (p * ap)
        + (m - m * m) * w / (p * p)
        + (n - n * n) * w / (ap * ap)
        + n * lambda / ap
        + m * (m + 1.0) / p
}

/// Scalar curvature, computed from the Ricci potential and cross-checked.
///
/// Fails with [`Error::FormulaMismatch`] when the forms disagree by more than
/// `tol` (relative) on resolved nodes.
pub fn scalar_curvature_checked(
    profile: &Profile,
    config: &BundleConfig,
    a: f64,
    tol: f64,
) -> Result<ScalarCurvature> {
    let (n, m, lambda) = (config.nf(), config.mf(), config.lambda);
    let pot = ricci_potential(profile, config, a)?;
    let len = profile.len();
    let mut r = Vec::with_capacity(len);
    let mut r_expanded = Vec::with_capacity(len);
    for i in 0..len {
        let (p, w) = (profile.dphi[i], profile.d2phi[i]);
        let du = pot.du[i];
        r.push(n * (lambda - m - 1.0 + du) / (a + p) + m * du / p + pot.d2u[i] / w);
        r_expanded.push(scalar_curvature_expanded(
            n,
            m,
            lambda,
            a,
            [p, w, profile.d3phi[i], profile.d4phi[i]],
        ));
    }
    let mask = resolved(profile);
    let scale = 1e-3 * masked_sup(&r, &mask, f64::abs);
    let mut max_discrepancy: f64 = 0.0;
    let mut worst_rho = profile.grid.rho[0];
    for i in (0..len).filter(|&i| mask[i]) {
        let den = r[i].abs().max(r_expanded[i].abs()).max(scale);
        let d = if den > 0.0 {
            (r[i] - r_expanded[i]).abs() / den
        } else {
            0.0
        };
        if !(d <= max_discrepancy) {
            max_discrepancy = d;
            worst_rho = profile.grid.rho[i];
        }
    }
    if !(max_discrepancy <= tol) {
        return Err(Error::FormulaMismatch {
            discrepancy: max_discrepancy,
            rho: worst_rho,
        });
    }
    Ok(ScalarCurvature {
        r,
        r_expanded,
        max_discrepancy,
        worst_rho,
        resolved: mask,
    })
}

/// Scalar curvature with the default stencil tolerance.
pub fn scalar_curvature(
    profile: &Profile,
    config: &BundleConfig,
    a: f64,
) -> Result<ScalarCurvature> {
    scalar_curvature_checked(profile, config, a, FORMULA_TOL)
}

/// A radial function with its first two ρ-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl RadialField {
    /// Differentiate nodal values with the fourth-order stencils.
    pub fn from_values(values: Vec<f64>, h: f64) -> Self {
        let (d1, d2) = field_derivatives(&values, h);
        RadialField { values, d1, d2 }
    }
}

/// `Δf = f″/φ″ + m f′/φ′ + n f′/(a+φ′)` for radial `f`.
pub fn radial_laplacian(
    profile: &Profile,
    config: &BundleConfig,
    a: f64,
    f: &RadialField,
) -> Result<Vec<f64>> {
    check_cone(profile)?;
    let (n, m) = (config.nf(), config.mf());
    Ok((0..profile.len())
        .map(|i| {
            let (p, w) = (profile.dphi[i], profile.d2phi[i]);
            f.d2[i] / w + m * f.d1[i] / p + n * f.d1[i] / (a + p)
        })
        .collect())
}

/// `|∇f|² = (f′)²/φ″` for radial `f`.
pub fn radial_gradient_sq(profile: &Profile, f: &RadialField) -> Result<Vec<f64>> {
    check_cone(profile)?;
    Ok((0..profile.len())
        .map(|i| f.d1[i] * f.d1[i] / profile.d2phi[i])
        .collect())
}

/// Cumulative radial arclength `ℓ(ρ_i) = ∫_{−∞}^{ρ_i} √φ″ dρ` at every node,
/// and the total length of the line.
///
/// Interior intervals use the fourth-order rule `h(−f₋₁ + 13f₀ + 13f₁ − f₂)/24`
/// (ghosts from the exponential closures); the tails are integrated exactly
/// under the closures, `∫ √(c e^ρ) dρ = 2√(c e^{ρ_min})`.
pub fn arclength(profile: &Profile) -> (Vec<f64>, f64) {
    let len = profile.len();
    let h = profile.grid.h;
    let g: Vec<f64> = profile.d2phi.iter().map(|w| w.sqrt()).collect();
    let at = |j: isize| -> f64 {
        if j < 0 {
            g[0] * (0.5 * j as f64 * h).exp()
        } else if j as usize >= len {
            g[len - 1] * (-0.5 * (j as usize - len + 1) as f64 * h).exp()
        } else {
            g[j as usize]
        }
    };
    let mut ell = Vec::with_capacity(len);
    let mut acc = 2.0 * g[0];
    ell.push(acc);
    for i in 0..len - 1 {
        let j = i as isize;
        acc += h / 24.0 * (-at(j - 1) + 13.0 * at(j) + 13.0 * at(j + 1) - at(j + 2));
        ell.push(acc);
    }
    let total = acc + 2.0 * g[len - 1];
    (ell, total)
}

/// Cubic Hermite interpolation of nodal values with known slopes.
pub(crate) fn hermite(rho: &[f64], v: &[f64], dv: &[f64], x: f64) -> f64 {
    let len = rho.len();
    let h = rho[1] - rho[0];
    let k = (((x - rho[0]) / h).floor().max(0.0) as usize).min(len - 2);
    let t = (x - rho[k]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * v[k] + h10 * h * dv[k] + h01 * v[k + 1] + h11 * h * dv[k + 1]
}

/// Arclength position of `rho` (±∞ allowed).
fn arclength_at(profile: &Profile, ell: &[f64], total: f64, rho: f64) -> f64 {
    let g = &profile.grid;
    if rho == f64::NEG_INFINITY {
        return 0.0;
    }
    if rho == f64::INFINITY {
        return total;
    }
    if rho <= g.rho_min() {
        return 2.0 * (profile.d2phi[0] * (rho - g.rho_min()).exp()).sqrt();
    }
    if rho >= g.rho_max() {
        let n = profile.len() - 1;
        return total - 2.0 * (profile.d2phi[n] * (g.rho_max() - rho).exp()).sqrt();
    }
    let slope: Vec<f64> = profile.d2phi.iter().map(|w| w.sqrt()).collect();
    hermite(&g.rho, ell, &slope, rho)
}

/// Radial distance `∫_{ρ1}^{ρ2} √φ″ dρ`; `rho1` may be −∞ and `rho2` +∞.
pub fn radial_distance(profile: &Profile, rho1: f64, rho2: f64) -> f64 {
    if rho1 == rho2 {
        return 0.0;
    }
    let (ell, total) = arclength(profile);
    let d = arclength_at(profile, &ell, total, rho2) - arclength_at(profile, &ell, total, rho1);
    d.abs()
}

/// Full-line radial length, the fibre diameter surrogate.
pub fn fibre_diameter(profile: &Profile) -> f64 {
    arclength(profile).1
}

/// Equatorial `CP^m` contribution `π √(sup φ′)`.
pub fn diam_cp_factor(profile: &Profile) -> f64 {
    let sup = profile.dphi.iter().cloned().fold(0.0, f64::max);
    std::f64::consts::PI * sup.sqrt()
}

/// Coefficients of `(a + y)ⁿ yᵐ` as a polynomial in `y`.
fn volume_density_poly(config: &BundleConfig, a: f64) -> Vec<f64> {
    let (n, m) = (config.n as usize, config.m as usize);
    let mut c = vec![0.0; n + m + 1];
    let mut binom = 1.0;
    for k in 0..=n {
        c[m + k] = binom * a.powi((n - k) as i32);
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    c
}

/// `∫₀ˣ (a+y)ⁿ yᵐ dy`.
pub(crate) fn volume_antiderivative(config: &BundleConfig, a: f64, x: f64) -> f64 {
    volume_density_poly(config, a)
        .iter()
        .enumerate()
        .map(|(k, c)| c * x.powi(k as i32 + 1) / (k + 1) as f64)
        .sum()
}

/// Volume `∫_{−∞}^{rho_upper} (a+φ′)ⁿ (φ′)ᵐ φ″ dρ` times the base factor.
///
/// The integrand is `d/dρ` of a polynomial in φ′, so the integral is that
/// polynomial evaluated at φ′(rho_upper) (Hermite-interpolated between nodes,
/// closure-extrapolated outside the grid).
pub fn volume(profile: &Profile, config: &BundleConfig, a: f64, rho_upper: f64) -> f64 {
    let g = &profile.grid;
    let x = if rho_upper == f64::NEG_INFINITY {
        0.0
    } else if rho_upper == f64::INFINITY {
        profile.b
    } else if rho_upper <= g.rho_min() {
        profile.dphi[0] * (rho_upper - g.rho_min()).exp()
    } else if rho_upper >= g.rho_max() {
        let n = profile.len() - 1;
        profile.b - profile.upper[n] * (g.rho_max() - rho_upper).exp()
    } else {
        hermite(&g.rho, &profile.dphi, &profile.d2phi, rho_upper)
    };
    config.base_volume_factor * volume_antiderivative(config, a, x)
}

/// Full-line volume by composite Simpson quadrature in ρ plus exact tails.
///
/// Independent of [`volume`]; used as a cross-check.
pub fn volume_quadrature(profile: &Profile, config: &BundleConfig, a: f64) -> f64 {
    let (n, m) = (config.n as i32, config.m as i32);
    let len = profile.len();
    let h = profile.grid.h;
    let f: Vec<f64> = (0..len)
        .map(|i| {
            let p = profile.dphi[i];
            (a + p).powi(n) * p.powi(m) * profile.d2phi[i]
        })
        .collect();
    let intervals = len - 1;
    let simpson_end = if intervals % 2 == 0 { len - 1 } else { len - 4 };
    let mut sum = 0.0;
    let mut i = 0;
    while i < simpson_end {
        sum += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        i += 2;
    }
    if simpson_end < len - 1 {
        let j = simpson_end;
        sum += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
    }
    let lower = volume_antiderivative(config, a, profile.dphi[0]);
    // upper tail: ∫ over φ′ ∈ (b − q, b), expanded around b to avoid cancellation
    let q = profile.upper[len - 1];
    let b = profile.b;
    let poly = volume_density_poly(config, a);
    let mut upper = 0.0;
    // ∫₀^q P(b − y) dy with P the density polynomial, via Taylor expansion at b
    let mut deriv = poly.clone();
    let mut fact = 1.0;
    for k in 0..poly.len() {
        let val: f64 = deriv
            .iter()
            .enumerate()
            .map(|(j, c)| c * b.powi(j as i32))
            .sum();
        upper += val * (-1f64).powi(k as i32) * q.powi(k as i32 + 1) / ((k + 1) as f64 * fact);
        fact *= (k + 1) as f64;
        deriv = deriv
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| c * j as f64)
            .collect();
    }
    config.base_volume_factor * (sum + lower + upper)
}

/// The ratios bounded by the curvature estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProxies {
    /// φ⁗/(φ″)²
    pub fourth: Vec<f64>,
    /// φ‴/φ″
    pub third: Vec<f64>,
    /// φ″/φ′
    pub fibre: Vec<f64>,
    /// φ″/(a+φ′)
    pub base: Vec<f64>,
    /// φ″/(φ′)²
    pub fibre_sq: Vec<f64>,
    /// φ″/(a+φ′)²
    pub base_sq: Vec<f64>,
    pub resolved: Vec<bool>,
}

impl CurvatureProxies {
    /// Sup-norms over resolved nodes, in field order.
    pub fn sups(&self) -> [f64; 6] {
        let s = |v: &Vec<f64>| masked_sup(v, &self.resolved, f64::abs);
        [
            s(&self.fourth),
            s(&self.third),
            s(&self.fibre),
            s(&self.base),
            s(&self.fibre_sq),
            s(&self.base_sq),
        ]
    }
}

pub fn curvature_proxies(profile: &Profile, a: f64) -> Result<CurvatureProxies> {
    check_cone(profile)?;
    let len = profile.len();
    let mut out = CurvatureProxies {
        fourth: Vec::with_capacity(len),
        third: Vec::with_capacity(len),
        fibre: Vec::with_capacity(len),
        base: Vec::with_capacity(len),
        fibre_sq: Vec::with_capacity(len),
        base_sq: Vec::with_capacity(len),
        resolved: resolved(profile),
    };
    for i in 0..len {
        let (p, w) = (profile.dphi[i], profile.d2phi[i]);
        out.fourth.push(profile.d4phi[i] / (w * w));
        out.third.push(profile.d3phi[i] / w);
        out.fibre.push(w / p);
        out.base.push(w / (a + p));
        out.fibre_sq.push(w / (p * p));
        out.base_sq.push(w / ((a + p) * (a + p)));
    }
    Ok(out)
}

/// Everything the diagnostics read from one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFields {
    pub potential: RicciPotential,
    pub curvature: ScalarCurvature,
    pub proxies: CurvatureProxies,
}

pub fn geometry_fields(profile: &Profile, config: &BundleConfig, a: f64) -> Result<GeometryFields> {
    Ok(GeometryFields {
        potential: ricci_potential(profile, config, a)?,
        curvature: scalar_curvature(profile, config, a)?,
        proxies: curvature_proxies(profile, a)?,
    })
}
