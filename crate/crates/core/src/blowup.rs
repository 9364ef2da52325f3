//! Type-I rescaling and classification of blow-up limits.
//!
//! The classifier reads the volume trichotomy: the volume stays positive when
//! only the zero section is contracted, decays like `(1−t)^{m+1}` when the
//! fibres collapse, and like `(1−t)^{m+n+1}` at extinction. Finite-horizon
//! proxies with explicit thresholds stand in for the limits, and every
//! threshold is returned with the verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowState, Parametrization, RunRecord};
use crate::geometry;
use crate::profile::{BundleConfig, KahlerClass, Profile};
use crate::soliton;

/// Shortest horizon the classifier accepts.
pub const MIN_HORIZON: f64 = 6.0;

/// The three possible limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupCase {
    /// Shrinking soliton on the total space of `L^(m+1)`.
    SolitonOnBundle,
    /// `C^n × CP^(m+1)`.
    ProductCnCPm1,
    /// Compact shrinking soliton on the whole manifold.
    CompactSoliton,
}

impl std::fmt::Display for BlowupCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BlowupCase::SolitonOnBundle => "SolitonOnBundle",
            BlowupCase::ProductCnCPm1 => "ProductCnCPm1",
            BlowupCase::CompactSoliton => "CompactSoliton",
        };
        f.write_str(s)
    }
}

/// Quantities behind a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// `min Vol(t_k) / Vol(s=2)` over the last three checkpoints.
    pub vol_liminf_proxy: f64,
    /// Spread of `(1−t)^{−N} Vol` over the last three checkpoints (max/min).
    pub vol_type_i_ratio: f64,
    /// Growth of `(1−t)^{−N} Vol` from the third-to-last to the last checkpoint.
    pub vol_type_i_growth: f64,
    /// Case-specific comparison with the predicted limit at the last
    /// checkpoint: momentum-chart distance to the soliton, affine-fit residual,
    /// or `|R − (m+1)|` at the fibre equator.
    pub comparison_sup: f64,
    /// `sup |H|` on `|ρ − ρ_c| ≤ 3` at the last checkpoint.
    pub h_sup_local: f64,
}

/// Thresholds of the finite-horizon proxies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub liminf_fraction: f64,
    pub stabilization: f64,
    pub growth: f64,
    pub min_horizon: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            liminf_fraction: 0.5,
            stabilization: 0.2,
            growth: 2.0,
            min_horizon: MIN_HORIZON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub case: BlowupCase,
    pub evidence: Evidence,
    pub thresholds: Thresholds,
}

/// `g_i(t') = (1−t_i)⁻¹ g(t_i + (1−t_i) t')`: the parabolic rescaling that
/// moves `t_i` to 0 and keeps the singular time at 1.
///
/// The result is an unnormalized state at `t' = (t − t_i)/(1 − t_i)`; at
/// `t = t_i` its profile is the normalized snapshot at `s_i = −ln(1−t_i)`.
pub fn type_i_rescale(state: &FlowState, t_i: f64) -> Result<FlowState> {
    if !(t_i < 1.0 && t_i.is_finite()) {
        return Err(Error::input("t_i", "must be finite and below 1"));
    }
    let base = state.unnormalized();
    let k = 1.0 / (1.0 - t_i);
    let t = (base.t - t_i) * k;
    Ok(FlowState {
        param: Parametrization::Unnormalized,
        t,
        s: -(-t).ln_1p(),
        profile: base.profile.scaled(k),
        class_now: KahlerClass {
            a: k * base.class_now.a,
            b: k * base.class_now.b,
        },
    })
}

/// Unnormalized total volume of a snapshot.
fn volume_of(state: &FlowState, config: &BundleConfig) -> f64 {
    let st = state.unnormalized();
    geometry::volume(&st.profile, config, st.class_now.a, f64::INFINITY)
}

/// Node with φ′ closest to `b/2` (the equator of the fibre).
pub fn equator_node(profile: &Profile) -> usize {
    let k = profile.midpoint().min(profile.len() - 1);
    let gap = |i: usize| (profile.dphi[i] - profile.upper[i]).abs();
    if k > 0 && gap(k - 1) < gap(k) {
        k - 1
    } else {
        k
    }
}

/// `sup |H|` on `|ρ − ρ_c| ≤ half_width`.
pub fn h_sup_near_equator(profile: &Profile, half_width: f64) -> f64 {
    let c = profile.grid.rho[equator_node(profile)];
    let h = profile.h_quantity();
    (0..profile.len())
        .filter(|&i| (profile.grid.rho[i] - c).abs() <= half_width)
        .map(|i| h[i].abs())
        .fold(0.0, f64::max)
}

/// Least-squares fit `φ̃ − ũ ≈ c₁ φ̃′ + c₀` over all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub c1: f64,
    pub c0: f64,
    pub sup_residual: f64,
}

/// Compact-soliton test: on a gradient shrinking soliton `φ − u` is an affine
/// function of the momentum.
pub fn compact_soliton_fit(state: &FlowState, config: &BundleConfig) -> Result<AffineFit> {
    let st = state.normalized();
    let p = &st.profile;
    let pot = geometry::ricci_potential(p, config, st.class_now.a)?;
    let phi = p.phi();
    let y: Vec<f64> = (0..p.len()).map(|i| phi[i] - pot.u[i]).collect();
    let x = &p.dphi;
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    let sup_residual = (0..x.len())
        .map(|i| (y[i] - c1 * x[i] - c0).abs())
        .fold(0.0, f64::max);
    Ok(AffineFit {
        c1,
        c0,
        sup_residual,
    })
}

/// `sup_{x∈[0.1, 2]} |w_flow − w_soliton|` against the soliton on `L^(m+1)`
/// with `a = λ − m − 1`.
pub fn soliton_discrepancy(state: &FlowState, config: &BundleConfig) -> Result<f64> {
    let a = config.lambda - config.mf() - 1.0;
    let c = soliton::solve_c_star(config, a)?;
    let sol = soliton::soliton_profile(config, a, c, 100.0, 64)?;
    let chart = soliton::flow_to_momentum(&state.normalized().profile)?;
    soliton::momentum_discrepancy(&chart, &sol, 0.1, 2.0, 400)
}

/// Normalized scalar curvature at the fibre equator.
pub fn equator_curvature(state: &FlowState, config: &BundleConfig) -> Result<f64> {
    let st = state.normalized();
    let r = geometry::scalar_curvature(&st.profile, config, st.class_now.a)?;
    Ok(r.r[equator_node(&st.profile)])
}

/// Classify the blow-up limit of a run from its volume history.
pub fn classify_limit(run: &RunRecord) -> Result<BlowupVerdict> {
    let th = Thresholds::default();
    let snaps = &run.snapshots;
    let s_max = snaps.last().map_or(0.0, |st| st.s);
    if s_max < th.min_horizon || snaps.len() < 4 {
        return Err(Error::Inconclusive { s_max });
    }
    let config = &run.config;
    let big_n = config.dim() as i32;
    let reference = snaps
        .iter()
        .min_by(|x, y| (x.s - 2.0).abs().total_cmp(&(y.s - 2.0).abs()))
        .expect("non-empty");
    let vol_ref = volume_of(reference, config);
    let tail = &snaps[snaps.len() - 3..];
    let vols: Vec<f64> = tail.iter().map(|st| volume_of(st, config)).collect();
    let ratios: Vec<f64> = tail
        .iter()
        .zip(&vols)
        .map(|(st, v)| v * st.s.exp().powi(big_n))
        .collect();

    let vol_liminf_proxy = vols.iter().cloned().fold(f64::INFINITY, f64::min) / vol_ref;
    let rmax = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let vol_type_i_ratio = rmax / rmin;
    let vol_type_i_growth = ratios[2] / ratios[0];
    let stabilized = ratios
        .iter()
        .all(|r| (r / ratios[2] - 1.0).abs() <= th.stabilization);

    let case = if vol_liminf_proxy > th.liminf_fraction {
        BlowupCase::SolitonOnBundle
    } else if stabilized {
        BlowupCase::CompactSoliton
    } else {
        BlowupCase::ProductCnCPm1
    };
    let last = run.last();
    let comparison_sup = match case {
        BlowupCase::SolitonOnBundle => soliton_discrepancy(last, config)?,
        BlowupCase::CompactSoliton => compact_soliton_fit(last, config)?.sup_residual,
        BlowupCase::ProductCnCPm1 => (equator_curvature(last, config)? - (config.mf() + 1.0)).abs(),
    };
    Ok(BlowupVerdict {
        case,
        evidence: Evidence {
            vol_liminf_proxy,
            vol_type_i_ratio,
            vol_type_i_growth,
            comparison_sup,
            h_sup_local: h_sup_near_equator(&last.normalized().profile, 3.0),
        },
        thresholds: th,
    })
}

/// `(1−t)|R(ρ0, t)|` at every checkpoint (cubic interpolation off the grid).
pub fn exterior_flatness(run: &RunRecord, rho0: f64) -> Result<Vec<(f64, f64)>> {
    run.snapshots
        .iter()
        .map(|st| {
            let st = st.normalized();
            let p = &st.profile;
            let r = geometry::scalar_curvature(p, &run.config, st.class_now.a)?;
            Ok((st.s, interpolate(&p.grid.rho, &r.r, rho0)?.abs()))
        })
        .collect()
}

/// Four-point Lagrange interpolation on a uniform grid.
fn interpolate(rho: &[f64], v: &[f64], x: f64) -> Result<f64> {
    let len = rho.len();
    let h = rho[1] - rho[0];
    if !(x >= rho[0] && x <= rho[len - 1]) {
        return Err(Error::input("rho0", format!("{x} is outside the grid")));
    }
    let j = ((x - rho[0]) / h).floor() as usize;
    if (x - rho[j.min(len - 1)]).abs() <= 1e-12 * h.max(1.0) {
        return Ok(v[j.min(len - 1)]);
    }
    let start = j.saturating_sub(1).min(len - 4);
    let mut out = 0.0;
    for a in start..start + 4 {
        let mut l = 1.0;
        for b in start..start + 4 {
            if a != b {
                l *= (x - rho[b]) / (rho[a] - rho[b]);
            }
        }
        out += l * v[a];
    }
    Ok(out)
}
