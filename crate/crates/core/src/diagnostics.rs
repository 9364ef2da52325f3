//! Potential-theoretic objects along a normalized run and audits of the
//! estimates they should satisfy.
//!
//! Everything is evaluated in the normalized picture `g̃ = (1−t)⁻¹ g`, where
//! every `(1−t)`-weighted quantity (Type-I, Li–Yau, local Type-I) becomes a
//! plain sup over the normalized metric.
//!
//! The Ricci potential is `u₀ = ∂_tφ + (φ + N t)/(1−t)` with `N = m+n+1`; using
//! `∂_s φ̃ = φ̃ − ũ − N s` this is `u₀ = φ̃ − ũ − N s + N(e^s − 1)`. The weighted
//! potential adds `e^s η_A`, and its minimizer is the Ricci vertex.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{ClassPath, FlowState, RunRecord, SingularityType};
use crate::geometry::{self, arclength, hermite, radial_distance, RadialField};
use crate::profile::{logistic, softplus, BundleConfig, Grid, Profile};

/// Default radius (in Type-I units) of the Harnack ball around the vertex.
pub const DEFAULT_HARNACK_RADIUS: f64 = 1.0;

/// Largest weight tried by the automatic scan.
const MAX_WEIGHT: f64 = 4096.0;

/// Nodes at each end of the grid where a vertex is not trusted.
const BOUNDARY_NODES: usize = 3;

/// Quintic smoothstep `10x³ − 15x⁴ + 6x⁵` and its first two derivatives in `x`.
fn smoothstep(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let ds = 30.0 * x * x * (1.0 - x) * (1.0 - x);
    let d2s = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    (s, ds, d2s)
}

/// The weight `η_A`: `b log(1+e^ρ)` up to `2A`, constant from `4A` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub a: f64,
    pub b: f64,
}

impl Weight {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 1.0 && a.is_finite()) {
            return Err(Error::input("weight.A", "must be at least 1"));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::input("weight.b", "must be nonnegative"));
        }
        Ok(Weight { a, b })
    }

    /// `(η, η′, η″)` at `rho`.
    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        let (f, f1, f2) = {
            let sg = logistic(rho);
            (
                self.b * softplus(rho),
                self.b * sg,
                self.b * sg * logistic(-rho),
            )
        };
        let plateau = self.b * softplus(4.0 * self.a);
        if rho >= 4.0 * self.a {
            return (plateau, 0.0, 0.0);
        }
        let width = 2.0 * self.a;
        let (s, ds, d2s) = smoothstep((rho - width) / width);
        let (ds, d2s) = (ds / width, d2s / (width * width));
        let gap = plateau - f;
        (
            (1.0 - s) * f + s * plateau,
            f1 * (1.0 - s) + ds * gap,
            f2 * (1.0 - s) - 2.0 * ds * f1 + d2s * gap,
        )
    }
}

/// `η_A` at every node of `grid`.
pub fn weight_eta(a: f64, b: f64, grid: &Grid) -> Result<Vec<f64>> {
    let w = Weight::new(a, b)?;
    Ok(grid.rho.iter().map(|r| w.eval(*r).0).collect())
}

/// Potentials and vertex at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTrack {
    pub s: f64,
    pub t: f64,
    pub u0: Vec<f64>,
    pub weight: f64,
    pub u_w: Vec<f64>,
    /// Vertex position; `−∞` when the minimum is approached on the zero section.
    pub vertex_rho: f64,
    pub a_inf: f64,
    pub v: Vec<f64>,
    /// `v′` and `v″`, assembled from exact pieces and the potential's stencils.
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
}

/// `u₀ = φ̃ − ũ − N s + N(e^s − 1)` with its first two ρ-derivatives.
fn ricci_u0(state: &FlowState, config: &BundleConfig) -> Result<[Vec<f64>; 3]> {
    let p = &state.profile;
    let pot = geometry::ricci_potential(p, config, state.class_now.a)?;
    let big_n = f64::from(config.dim());
    let shift = -big_n * state.s + big_n * state.s.exp_m1();
    let phi = p.phi();
    let u0 = (0..p.len()).map(|i| phi[i] - pot.u[i] + shift).collect();
    let du0 = (0..p.len()).map(|i| p.dphi[i] - pot.du[i]).collect();
    let d2u0 = (0..p.len()).map(|i| p.d2phi[i] - pot.d2u[i]).collect();
    Ok([u0, du0, d2u0])
}

/// Relative tolerance below which potential values count as tied.
const TIE_TOL: f64 = 1e-9;

/// Discrete argmin with a parabolic refinement; ties (within [`TIE_TOL`]) go
/// to the smaller ρ, so flat tails at round-off level do not move the vertex.
///
/// A minimum on the first node is accepted as a vertex at `−∞` when the
/// potential is nondecreasing there (the infimum is approached on the zero
/// section); any other minimum near the ends is an error.
fn locate_vertex(grid: &Grid, f: &[f64]) -> Result<(f64, f64)> {
    let len = f.len();
    let fmin = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = TIE_TOL * (1.0 + fmin.abs());
    let k = f.iter().position(|v| *v <= fmin + tol).unwrap_or(0);
    if k == 0 && f[..=BOUNDARY_NODES].windows(2).all(|w| w[1] >= w[0] - tol) {
        return Ok((f64::NEG_INFINITY, fmin));
    }
    if k < BOUNDARY_NODES || k + BOUNDARY_NODES >= len {
        return Err(Error::VertexAtBoundary { node: k });
    }
    let (fm, f0, fp) = (f[k - 1], f[k], f[k + 1]);
    let curv = fm - 2.0 * f0 + fp;
    if !(curv > 0.0) {
        return Ok((grid.rho[k], f0.min(fmin)));
    }
    let delta = (0.5 * (fm - fp) / curv).clamp(-1.0, 1.0);
    let refined = (f0 - 0.25 * (fm - fp) * delta).min(fmin);
    Ok((grid.rho[k] + delta * grid.h, refined))
}

fn track_one(state: &FlowState, config: &BundleConfig, weight: Weight) -> Result<PotentialTrack> {
    let state = state.normalized();
    let [u0, du0, d2u0] = ricci_u0(&state, config)?;
    let grid = &state.profile.grid;
    let es = state.s.exp();
    let len = grid.len();
    let (mut u_w, mut dw, mut d2w) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for i in 0..len {
        let (e, e1, e2) = weight.eval(grid.rho[i]);
        u_w[i] = u0[i] + es * e;
        dw[i] = du0[i] + es * e1;
        d2w[i] = d2u0[i] + es * e2;
    }
    let (vertex_rho, a_inf) = locate_vertex(grid, &u_w).map_err(|e| e.at(state.s))?;
    let v = u_w.iter().map(|x| x - a_inf + 1.0).collect();
    Ok(PotentialTrack {
        s: state.s,
        t: state.t,
        u0,
        weight: weight.a,
        u_w,
        vertex_rho,
        a_inf,
        v,
        dv: dw,
        d2v: d2w,
    })
}

/// Potentials and vertices at every snapshot for a fixed weight.
pub fn potential_track(
    snapshots: &[FlowState],
    config: &BundleConfig,
    weight: Weight,
) -> Result<Vec<PotentialTrack>> {
    snapshots
        .par_iter()
        .map(|st| track_one(st, config, weight))
        .collect()
}

/// Weight-largeness scan: double `A` from 1 until the vertex lies below `A`
/// on the first three snapshots.
pub fn auto_weight(snapshots: &[FlowState], config: &BundleConfig, b: f64) -> Result<Weight> {
    let head = &snapshots[..snapshots.len().min(3)];
    let mut a = 1.0;
    loop {
        let w = Weight::new(a, b)?;
        let tracks = potential_track(head, config, w)?;
        if tracks.iter().all(|t| t.vertex_rho < a) {
            return Ok(w);
        }
        a *= 2.0;
        if a > MAX_WEIGHT {
            return Err(Error::input(
                "weight.A",
                "no weight up to 4096 confines the vertex",
            ));
        }
    }
}

/// Fitted constant of the `a(s)` monotonicity and its stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityAudit {
    /// Smallest B making `e^{−s}(a − B)` nondecreasing.
    pub b_increasing: f64,
    /// Smallest B making `e^{−s}(a + B)` nonincreasing.
    pub b_decreasing: f64,
    pub b0: f64,
    pub b0_first_half: f64,
    pub stable: bool,
}

fn fit_b0(s: &[f64], a: &[f64]) -> (f64, f64) {
    let (mut inc, mut dec) = (0.0f64, 0.0f64);
    for k in 1..s.len() {
        let (e1, e2) = ((-s[k - 1]).exp(), (-s[k]).exp());
        let d = e1 - e2;
        let jump = e1 * a[k - 1] - e2 * a[k];
        inc = inc.max(jump / d);
        dec = dec.max(-jump / d);
    }
    (inc, dec)
}

/// Fit B0 on all checkpoints and on the first half; stable if within 20%.
pub fn monotonicity_audit(tracks: &[PotentialTrack]) -> Result<MonotonicityAudit> {
    if tracks.len() < 10 {
        return Err(Error::input(
            "time.checkpoint_list",
            "monotonicity audit needs at least 10 checkpoints",
        ));
    }
    let s: Vec<f64> = tracks.iter().map(|t| t.s).collect();
    let a: Vec<f64> = tracks.iter().map(|t| t.a_inf).collect();
    let (inc, dec) = fit_b0(&s, &a);
    let half = tracks.len() / 2;
    let (hi, hd) = fit_b0(&s[..half], &a[..half]);
    let b0 = inc.max(dec);
    let b0_first_half = hi.max(hd);
    Ok(MonotonicityAudit {
        b_increasing: inc,
        b_decreasing: dec,
        b0,
        b0_first_half,
        stable: (b0 - b0_first_half).abs() <= 0.2 * b0,
    })
}

/// `φ̃′` at the vertex and its distance to the zero section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexGeometry {
    pub phi_at_vertex: f64,
    pub dist_to_p0: f64,
}

/// Position of the vertex relative to the contracting zero section.
pub fn vertex_geometry(
    track: &PotentialTrack,
    snapshot: &FlowState,
    path: &ClassPath,
) -> Result<VertexGeometry> {
    if path.sing_type == SingularityType::Collapse {
        return Err(Error::WrongSingularityType(path.sing_type.to_string()));
    }
    let p = snapshot.normalized().profile;
    Ok(vertex_geometry_of(&p, track.vertex_rho))
}

fn vertex_geometry_of(p: &Profile, rho_s: f64) -> VertexGeometry {
    if rho_s == f64::NEG_INFINITY {
        return VertexGeometry {
            phi_at_vertex: 0.0,
            dist_to_p0: 0.0,
        };
    }
    VertexGeometry {
        phi_at_vertex: hermite(&p.grid.rho, &p.dphi, &p.d2phi, rho_s),
        dist_to_p0: radial_distance(p, f64::NEG_INFINITY, rho_s),
    }
}

/// Estimate functionals at one checkpoint (normalized metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub s: f64,
    pub t: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub third_ratio_sup: f64,
    /// `(1−t) sup|R|`.
    pub type_i: f64,
    /// `(1−t) sup (|Δv| + |∇v|²)/v`.
    pub liyau: f64,
    /// `sup (1−t)|R| / (1 + d_t²/(1−t))`.
    pub local_type_i: f64,
    /// `sup v / inf v` on the Harnack ball.
    pub harnack: f64,
    pub vertex_rho: f64,
    pub a_inf: f64,
    /// `NaN` on collapse runs, where the vertex geometry is not defined.
    pub phi_at_vertex: f64,
    pub dist_to_p0: f64,
    /// Normalized full-line radial length.
    pub fibre_diam: f64,
    /// Unnormalized total volume `Vol_{g(t)}`.
    pub volume_total: f64,
}

fn report_one(
    state: &FlowState,
    track: &PotentialTrack,
    config: &BundleConfig,
    path: &ClassPath,
    radius: f64,
) -> Result<EstimateReport> {
    let state = state.normalized();
    let p = &state.profile;
    let a = state.class_now.a;
    let curv = geometry::scalar_curvature(p, config, a).map_err(|e| e.at(state.s))?;
    let mask = &curv.resolved;
    let h = p.h_quantity();
    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let third_ratio_sup = (0..p.len())
        .map(|i| (p.d3phi[i] / p.d2phi[i]).abs())
        .fold(0.0, f64::max);
    let type_i = curv.sup_abs();

    let field = RadialField {
        values: track.v.clone(),
        d1: track.dv.clone(),
        d2: track.d2v.clone(),
    };
    let lap = geometry::radial_laplacian(p, config, a, &field)?;
    let grad = geometry::radial_gradient_sq(p, &field)?;
    let ly: Vec<f64> = (0..p.len())
        .map(|i| (lap[i].abs() + grad[i]) / track.v[i])
        .collect();
    let liyau = geometry::masked_sup(&ly, mask, |x| x);

    let (ell, _) = arclength(p);
    let ell_s = if track.vertex_rho == f64::NEG_INFINITY {
        0.0
    } else {
        radial_distance(p, f64::NEG_INFINITY, track.vertex_rho)
    };
    let mut local_type_i: f64 = 0.0;
    let (mut vmax, mut vmin): (f64, f64) = (1.0, 1.0);
    for i in 0..p.len() {
        let d = (ell[i] - ell_s).abs();
        if mask[i] {
            local_type_i = local_type_i.max(curv.r[i].abs() / (1.0 + d * d));
        }
        if d <= radius {
            vmax = vmax.max(track.v[i]);
            vmin = vmin.min(track.v[i]);
        }
    }

    let vg = if path.sing_type == SingularityType::Collapse {
        VertexGeometry {
            phi_at_vertex: f64::NAN,
            dist_to_p0: f64::NAN,
        }
    } else {
        vertex_geometry_of(p, track.vertex_rho)
    };
    let big_n = config.dim() as i32;
    let volume_total = geometry::volume(p, config, a, f64::INFINITY) * (-state.s).exp().powi(big_n);
    Ok(EstimateReport {
        s: state.s,
        t: state.t,
        h_min,
        h_max,
        third_ratio_sup,
        type_i,
        liyau,
        local_type_i,
        harnack: vmax / vmin,
        vertex_rho: track.vertex_rho,
        a_inf: track.a_inf,
        phi_at_vertex: vg.phi_at_vertex,
        dist_to_p0: vg.dist_to_p0,
        fibre_diam: geometry::fibre_diameter(p),
        volume_total,
    })
}

/// Estimate functionals at every checkpoint, in s-order.
pub fn estimate_sweep(
    snapshots: &[FlowState],
    tracks: &[PotentialTrack],
    config: &BundleConfig,
    path: &ClassPath,
    harnack_radius: f64,
) -> Result<Vec<EstimateReport>> {
    if snapshots.len() != tracks.len() {
        return Err(Error::input(
            "tracks",
            "one potential track per snapshot is required",
        ));
    }
    snapshots
        .par_iter()
        .zip(tracks.par_iter())
        .map(|(st, tr)| report_one(st, tr, config, path, harnack_radius))
        .collect()
}

/// How the weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightChoice {
    Auto,
    Fixed(f64),
}

/// Everything the diagnostics produce for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub weight: Weight,
    pub tracks: Vec<PotentialTrack>,
    pub reports: Vec<EstimateReport>,
    /// `None` when the run has fewer than 10 checkpoints.
    pub monotonicity: Option<MonotonicityAudit>,
}

/// Run every diagnostic over the snapshots of `run`.
pub fn diagnose(run: &RunRecord, choice: WeightChoice, harnack_radius: f64) -> Result<Diagnostics> {
    let b_y = run.path.limit_b().max(0.0);
    let weight = match choice {
        WeightChoice::Auto => auto_weight(&run.snapshots, &run.config, b_y)?,
        WeightChoice::Fixed(a) => Weight::new(a, b_y)?,
    };
    let tracks = potential_track(&run.snapshots, &run.config, weight)?;
    let reports = estimate_sweep(
        &run.snapshots,
        &tracks,
        &run.config,
        &run.path,
        harnack_radius,
    )?;
    let monotonicity = if tracks.len() >= 10 {
        Some(monotonicity_audit(&tracks)?)
    } else {
        None
    };
    Ok(Diagnostics {
        weight,
        tracks,
        reports,
        monotonicity,
    })
}

/// One pass/fail line of the audit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

fn report_at(reports: &[EstimateReport], s: f64) -> Option<&EstimateReport> {
    reports.iter().find(|r| (r.s - s).abs() < 1e-9)
}

/// `f(s_hi)/f(s_lo)` must lie in `[1/max, max]` (two-sided) or below `max`.
fn ratio_audit(
    name: &str,
    reports: &[EstimateReport],
    (s_hi, s_lo): (f64, f64),
    f: impl Fn(&EstimateReport) -> f64,
    max: f64,
    two_sided: bool,
) -> Option<Audit> {
    let (hi, lo) = (report_at(reports, s_hi)?, report_at(reports, s_lo)?);
    let value = f(hi) / f(lo);
    let lower = if two_sided { 1.0 / max } else { 0.0 };
    Some(Audit {
        name: format!("{name} ratio s={s_hi}/s={s_lo}"),
        value,
        threshold: max,
        passed: value.is_finite() && value >= lower && value <= max,
    })
}

/// Pass/fail summary of the estimate audits for `report.json`.
pub fn audit_summary(diag: &Diagnostics, config: &BundleConfig) -> Vec<Audit> {
    let r = &diag.reports;
    let mut out = Vec::new();
    let (m, big_n) = (config.mf(), f64::from(config.dim()));
    let h_lo = ((m + 1.0) / big_n).ln() - 0.05;
    let h_hi = (4.0 * m + 1.0).ln() + 0.05;
    let hmin = r.iter().map(|x| x.h_min).fold(f64::INFINITY, f64::min);
    let hmax = r.iter().map(|x| x.h_max).fold(f64::NEG_INFINITY, f64::max);
    out.push(Audit {
        name: "H lower bound".into(),
        value: hmin,
        threshold: h_lo,
        passed: hmin >= h_lo,
    });
    out.push(Audit {
        name: "H upper bound".into(),
        value: hmax,
        threshold: h_hi,
        passed: hmax <= h_hi,
    });
    let vmax = r
        .iter()
        .map(|x| x.vertex_rho - diag.weight.a)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(Audit {
        name: "vertex below A (max rho_s - A)".into(),
        value: vmax,
        threshold: 0.0,
        passed: vmax < 0.0,
    });
    let loc = r.iter().all(|x| x.local_type_i <= x.type_i);
    out.push(Audit {
        name: "local Type-I <= Type-I".into(),
        value: r
            .iter()
            .map(|x| x.local_type_i - x.type_i)
            .fold(f64::NEG_INFINITY, f64::max),
        threshold: 0.0,
        passed: loc,
    });
    if let Some(mono) = diag.monotonicity {
        out.push(Audit {
            name: "B0 half-sample drift".into(),
            value: (mono.b0 - mono.b0_first_half).abs(),
            threshold: 0.2 * mono.b0,
            passed: mono.stable,
        });
    }
    if let Some(last) = r.last() {
        let s = last.s;
        out.extend(ratio_audit(
            "third ratio",
            r,
            (s, s / 2.0),
            |x| x.third_ratio_sup,
            1.5,
            false,
        ));
        out.extend(ratio_audit(
            "Type-I",
            r,
            (s, s - 2.0),
            |x| x.type_i,
            2.0,
            true,
        ));
        out.extend(ratio_audit(
            "Li-Yau",
            r,
            (s, s / 2.0),
            |x| x.liyau,
            1.5,
            false,
        ));
        out.extend(ratio_audit(
            "Harnack",
            r,
            (s, s / 2.0),
            |x| x.harnack,
            1.5,
            false,
        ));
    }
    out
}
