//! Radial profiles of Calabi-symmetric Kähler metrics.
//!
//! A metric in the class `a[D_H] + b[D_∞]` is described by the momentum profile
//! `φ′(ρ)` on a uniform ρ-grid, with `0 < φ′ < b` and `φ″ > 0`. Near the zero
//! section `φ′` is exponentially small and near the infinity divisor `b − φ′` is,
//! so a [`Profile`] stores both `φ′` and its complement `b − φ′`; derivatives are
//! taken from whichever of the two is smaller at a node, which keeps relative
//! accuracy at both ends of the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::{Stencils, GHOSTS};

/// Manifold data: base dimension `n`, fibre parameter `m`, Einstein constant `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub n: u32,
    pub m: u32,
    pub lambda: f64,
    #[serde(default = "default_volume_factor")]
    pub base_volume_factor: f64,
}

fn default_volume_factor() -> f64 {
    1.0
}

impl BundleConfig {
    pub fn new(n: u32, m: u32, lambda: f64) -> Result<Self> {
        let cfg = BundleConfig {
            n,
            m,
            lambda,
            base_volume_factor: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::input("bundle.n", "must be at least 1"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::input("bundle.lambda", "must be finite"));
        }
        if !(self.base_volume_factor > 0.0 && self.base_volume_factor.is_finite()) {
            return Err(Error::input(
                "bundle.base_volume_factor",
                "must be positive",
            ));
        }
        Ok(())
    }

    /// Complex dimension of the total space, `m + n + 1`.
    pub fn dim(&self) -> u32 {
        self.m + self.n + 1
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn mf(&self) -> f64 {
        self.m as f64
    }
}

/// Kähler class `a[D_H] + b[D_∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KahlerClass {
    pub a: f64,
    pub b: f64,
}

impl KahlerClass {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let c = KahlerClass { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::input("class.a0", "must be positive"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::input("class.b0", "must be positive"));
        }
        Ok(())
    }
}

/// Uniform grid in the radial coordinate ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rho: Vec<f64>,
    pub h: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn rho_min(&self) -> f64 {
        self.rho[0]
    }

    pub fn rho_max(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }

    /// Index of the node closest to ρ = 0 (the gauge anchor).
    pub fn anchor(&self) -> usize {
        let i = (-self.rho[0] / self.h).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }
}

/// Uniform grid with `count` nodes on `[rho_min, rho_max]`.
pub fn make_grid(rho_min: f64, rho_max: f64, count: usize) -> Result<Grid> {
    if !(rho_min.is_finite() && rho_max.is_finite()) {
        return Err(Error::InvalidGrid("bounds must be finite".into()));
    }
    if rho_min > -10.0 || rho_max < 10.0 {
        return Err(Error::InvalidGrid(format!(
            "need rho_min <= -10 and rho_max >= 10, got [{rho_min}, {rho_max}]"
        )));
    }
    if count < 256 {
        return Err(Error::InvalidGrid(format!(
            "need at least 256 nodes, got {count}"
        )));
    }
    let h = (rho_max - rho_min) / (count - 1) as f64;
    let mut rho: Vec<f64> = (0..count).map(|i| rho_min + i as f64 * h).collect();
    rho[count - 1] = rho_max;
    Ok(Grid { rho, h })
}

/// Logistic function `e^x / (1 + e^x)`, evaluated without overflow.
pub fn logistic(x: f64) -> f64 {
    if x < 0.0 {
        let e = x.exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Discretized radial profile.
///
/// `dphi` holds φ′ and `upper` holds `b − φ′`; the two are kept consistent by
/// every constructor but each is accurate where it is small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub grid: Grid,
    /// Class coefficient bounding φ′ from above.
    pub b: f64,
    /// φ at the anchor node (the node closest to ρ = 0).
    pub phi0: f64,
    pub dphi: Vec<f64>,
    pub upper: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub d3phi: Vec<f64>,
    pub d4phi: Vec<f64>,
}

impl Profile {
    /// Build from φ′ alone; the complement is formed by subtraction.
    pub fn from_dphi(grid: Grid, b: f64, phi0: f64, dphi: Vec<f64>) -> Self {
        let upper = dphi.iter().map(|p| b - p).collect();
        Self::from_parts(grid, b, phi0, dphi, upper)
    }

    /// Build from φ′ and `b − φ′` given separately (no derivatives yet).
    pub fn from_parts(grid: Grid, b: f64, phi0: f64, dphi: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = grid.len();
        assert_eq!(dphi.len(), n);
        assert_eq!(upper.len(), n);
        Profile {
            grid,
            b,
            phi0,
            dphi,
            upper,
            d2phi: vec![0.0; n],
            d3phi: vec![0.0; n],
            d4phi: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.dphi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dphi.is_empty()
    }

    /// φ at every node: trapezoidal quadrature of φ′ from the anchor node.
    pub fn phi(&self) -> Vec<f64> {
        let n = self.len();
        let h = self.grid.h;
        let k = self.grid.anchor();
        let mut phi = vec![0.0; n];
        phi[k] = self.phi0;
        for i in k + 1..n {
            phi[i] = phi[i - 1] + 0.5 * h * (self.dphi[i - 1] + self.dphi[i]);
        }
        for i in (0..k).rev() {
            phi[i] = phi[i + 1] - 0.5 * h * (self.dphi[i] + self.dphi[i + 1]);
        }
        phi
    }

    /// H = log(b φ″ / (φ′ (b − φ′))) at every node.
    pub fn h_quantity(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (self.b * self.d2phi[i] / (self.dphi[i] * self.upper[i])).ln())
            .collect()
    }

    /// Scale the profile and class by `k` (φ ↦ kφ, b ↦ kb).
    pub fn scaled(&self, k: f64) -> Profile {
        let s = |v: &Vec<f64>| v.iter().map(|x| k * x).collect::<Vec<_>>();
        Profile {
            grid: self.grid.clone(),
            b: k * self.b,
            phi0: k * self.phi0,
            dphi: s(&self.dphi),
            upper: s(&self.upper),
            d2phi: s(&self.d2phi),
            d3phi: s(&self.d3phi),
            d4phi: s(&self.d4phi),
        }
    }

    /// Index of the first node with φ′ ≥ b/2.
    pub fn midpoint(&self) -> usize {
        self.dphi
            .iter()
            .zip(&self.upper)
            .position(|(p, q)| p >= q)
            .unwrap_or(self.len())
    }
}

/// The canonical seed φ = b·log(1 + e^ρ), with derivatives in closed form.
pub fn initial_profile(class: KahlerClass, grid: Grid) -> Result<Profile> {
    class.validate()?;
    let b = class.b;
    let n = grid.len();
    let mut p = Profile::from_parts(
        grid,
        b,
        b * std::f64::consts::LN_2,
        vec![0.0; n],
        vec![0.0; n],
    );
    for i in 0..n {
        let r = p.grid.rho[i];
        let s = logistic(r);
        let c = logistic(-r);
        let w = b * s * c;
        p.dphi[i] = b * s;
        p.upper[i] = b * c;
        p.d2phi[i] = w;
        p.d3phi[i] = w * (c - s);
        p.d4phi[i] = w * (1.0 - 6.0 * s * c);
    }
    let k = p.grid.anchor();
    p.phi0 = b * softplus(p.grid.rho[k]);
    Ok(p)
}

/// Ghost-extended copies of φ′ and b − φ′ using the asymptotic closures.
pub(crate) fn extended(p: &[f64], q: &[f64], b: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = p.len();
    let mut pe = vec![0.0; n + 2 * GHOSTS];
    let mut qe = vec![0.0; n + 2 * GHOSTS];
    pe[GHOSTS..GHOSTS + n].copy_from_slice(p);
    qe[GHOSTS..GHOSTS + n].copy_from_slice(q);
    for k in 1..=GHOSTS {
        let decay = (-(k as f64) * h).exp();
        let lo = p[0] * decay;
        pe[GHOSTS - k] = lo;
        qe[GHOSTS - k] = b - lo;
        let hi = q[n - 1] * decay;
        qe[GHOSTS + n - 1 + k] = hi;
        pe[GHOSTS + n - 1 + k] = b - hi;
    }
    (pe, qe)
}

/// Derivatives φ″, φ‴, φ⁗ at every node from φ′ and b − φ′.
pub(crate) fn derivatives(p: &[f64], q: &[f64], b: f64, st: &Stencils) -> [Vec<f64>; 3] {
    let n = p.len();
    let (pe, qe) = extended(p, q, b, st.h);
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let d = if p[i] <= q[i] {
            st.apply(&pe, i + GHOSTS)
        } else {
            let d = st.apply(&qe, i + GHOSTS);
            [-d[0], -d[1], -d[2]]
        };
        out[0][i] = d[0];
        out[1][i] = d[1];
        out[2][i] = d[2];
    }
    out
}

/// Recompute φ″..φ⁗ by fourth-order central differences.
pub fn differentiate(profile: &Profile) -> Result<Profile> {
    let st = Stencils::new(profile.grid.h);
    let [d2, d3, d4] = derivatives(&profile.dphi, &profile.upper, profile.b, &st);
    if let Some(i) = d2.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::ConeViolation {
            node: i,
            rho: profile.grid.rho[i],
            what: format!("phi'' = {:e}", d2[i]),
        });
    }
    Ok(Profile {
        d2phi: d2,
        d3phi: d3,
        d4phi: d4,
        ..profile.clone()
    })
}

/// One item of the Kähler cone check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeCheck {
    ClassPositive,
    Positivity,
    LowerRatio,
    UpperRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violated: Vec<ConeCheck>,
    /// First node where φ′ ∉ (0, b) or φ″ ≤ 0, if any.
    pub first_bad_node: Option<usize>,
    /// |φ″/φ′ − 1| at ρ_min.
    pub lower_defect: f64,
    /// |φ″/(b − φ′) − 1| at ρ_max.
    pub upper_defect: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violated.is_empty()
    }
}

/// Check the Kähler cone conditions for `profile` in `class`.
pub fn validate_cone(profile: &Profile, class: KahlerClass, tol: f64) -> ValidationReport {
    let mut violated = Vec::new();
    if !(class.a > 0.0) {
        violated.push(ConeCheck::ClassPositive);
    }
    let n = profile.len();
    let first_bad_node = (0..n).find(|&i| {
        let (p, q, w) = (profile.dphi[i], profile.upper[i], profile.d2phi[i]);
        !(p > 0.0 && q > 0.0 && w > 0.0)
    });
    if first_bad_node.is_some() {
        violated.push(ConeCheck::Positivity);
    }
    let lower_defect = (profile.d2phi[0] / profile.dphi[0] - 1.0).abs();
    let upper_defect = (profile.d2phi[n - 1] / profile.upper[n - 1] - 1.0).abs();
    if !(lower_defect <= tol) {
        violated.push(ConeCheck::LowerRatio);
    }
    if !(upper_defect <= tol) {
        violated.push(ConeCheck::UpperRatio);
    }
    ValidationReport {
        violated,
        first_bad_node,
        lower_defect,
        upper_defect,
    }
}

/// Node-wise positivity check used by the flow and geometry routines.
pub(crate) fn check_cone(profile: &Profile) -> Result<()> {
    for i in 0..profile.len() {
        let (p, q, w) = (profile.dphi[i], profile.upper[i], profile.d2phi[i]);
        if !(p > 0.0 && q > 0.0 && w > 0.0) {
            return Err(Error::ConeViolation {
                node: i,
                rho: profile.grid.rho[i],
                what: format!("phi' = {p:e}, b - phi' = {q:e}, phi'' = {w:e}"),
            });
        }
    }
    Ok(())
}
