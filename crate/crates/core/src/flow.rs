//! Kähler–Ricci flow of Calabi-symmetric metrics.
//!
//! The class moves linearly, `a(t) = a0 − (λ−m−1)t`, `b(t) = b0 − (m+2)t`, and
//! the momentum profile obeys
//!
//! ```text
//! ∂_t φ′ = φ‴/φ″ + m φ″/φ′ + n φ″/(a+φ′) − (m+1)
//! ```
//!
//! After rescaling to singular time `T = 1`, runs integrate the normalized flow
//! in `s = −ln(1−t)` for `φ̃ = e^s φ`, which adds `+φ̃′` to the right-hand side.
//! The potential itself is tracked only at the anchor node, in the gauge
//! `∂_t φ = −u` with `u` the Ricci potential.
//!
//! The semi-discrete system is stiff: its diffusivity is `1/φ″`, which is
//! exponentially large at both ends of the grid. Runs use the linearly implicit
//! [`crate::integrate::ros2_step`] with error control; the explicit RK4 scheme
//! with the parabolic step limit is kept for short horizons.

use serde::{Deserialize, Serialize};

use crate::banded::Band;
use crate::error::{Error, Result};
use crate::integrate::{error_norm, rk4_step, ros2_step, System};
use crate::profile::{
    check_cone, derivatives, initial_profile, BundleConfig, Grid, KahlerClass, Profile,
};
use crate::stencil::Stencils;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityType {
    Contraction,
    Collapse,
    Extinction,
}

impl std::fmt::Display for SingularityType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SingularityType::Contraction => "Contraction",
            SingularityType::Collapse => "Collapse",
            SingularityType::Extinction => "Extinction",
        };
        f.write_str(s)
    }
}

/// Trajectory of the Kähler class under the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPath {
    pub a0: f64,
    pub b0: f64,
    pub slope_a: f64,
    pub slope_b: f64,
    /// Singular time T.
    pub t_sing: f64,
    pub sing_type: SingularityType,
    /// Whether the initial class is a multiple of the anticanonical class.
    pub anticanonical: bool,
}

impl ClassPath {
    pub fn a_at(&self, t: f64) -> f64 {
        self.a0 - self.slope_a * t
    }

    pub fn b_at(&self, t: f64) -> f64 {
        self.b0 - self.slope_b * t
    }

    pub fn class_at(&self, t: f64) -> KahlerClass {
        KahlerClass {
            a: self.a_at(t),
            b: self.b_at(t),
        }
    }

    /// `(e^s a(t), e^s b(t))` with `t = 1 − e^{−s}`; assumes `T = 1`.
    pub fn normalized_class(&self, s: f64) -> KahlerClass {
        let e = s.exp();
        KahlerClass {
            a: e * (self.a0 - self.slope_a) + self.slope_a,
            b: e * (self.b0 - self.slope_b) + self.slope_b,
        }
    }

    /// Class coefficient of `D_∞` in the limit class (after rescaling to T=1).
    pub fn limit_b(&self) -> f64 {
        self.b0 - self.slope_b
    }
}

/// Class path of the flow starting in `class0`.
pub fn class_path(config: &BundleConfig, class0: KahlerClass) -> Result<ClassPath> {
    config.validate()?;
    class0.validate()?;
    let m = config.mf();
    let slope_a = config.lambda - m - 1.0;
    let slope_b = m + 2.0;
    let t_a = if slope_a > 0.0 {
        class0.a / slope_a
    } else {
        f64::INFINITY
    };
    let t_b = class0.b / slope_b;
    let t_sing = t_a.min(t_b);
    let sing_type = if (t_a - t_b).abs() <= 1e-12 * t_sing {
        SingularityType::Extinction
    } else if t_a < t_b {
        SingularityType::Contraction
    } else {
        SingularityType::Collapse
    };
    let lhs = class0.a * slope_b;
    let rhs = class0.b * slope_a;
    let anticanonical = (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs());
    Ok(ClassPath {
        a0: class0.a,
        b0: class0.b,
        slope_a,
        slope_b,
        t_sing,
        sing_type,
        anticanonical,
    })
}

/// Parabolic rescaling `g ↦ T⁻¹ g(T t)` so that the singular time becomes 1.
pub fn rescale_to_unit_time(path: &ClassPath, class0: KahlerClass) -> (ClassPath, KahlerClass) {
    let t = path.t_sing;
    let mut a = class0.a / t;
    let mut b = class0.b / t;
    // pin the vanishing coefficients exactly so the limit class is exact
    match path.sing_type {
        SingularityType::Contraction => a = path.slope_a,
        SingularityType::Collapse => b = path.slope_b,
        SingularityType::Extinction => {
            a = path.slope_a;
            b = path.slope_b;
        }
    }
    let class = KahlerClass { a, b };
    let rescaled = ClassPath {
        a0: a,
        b0: b,
        t_sing: 1.0,
        ..*path
    };
    (rescaled, class)
}

/// Time variable in which a state is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parametrization {
    /// `φ̃ = e^s φ` evolved in `s = −ln(1−t)`.
    Normalized,
    /// `φ` evolved in `t` (with `T = 1`).
    Unnormalized,
}

/// Snapshot of the flow.
///
/// `profile` and `class_now` are in the scale of `param`: for normalized
/// states they hold `φ̃` and `(ã, b̃)`. `profile.phi0` is the anchor value of
/// the potential in the canonical gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub param: Parametrization,
    pub t: f64,
    pub s: f64,
    pub profile: Profile,
    pub class_now: KahlerClass,
}

impl FlowState {
    /// Seed state at `t = s = 0`.
    pub fn initial(path: &ClassPath, grid: Grid, param: Parametrization) -> Result<Self> {
        let class = path.class_at(0.0);
        let profile = initial_profile(class, grid)?;
        Ok(FlowState {
            param,
            t: 0.0,
            s: 0.0,
            profile,
            class_now: class,
        })
    }

    pub fn phi_anchor(&self) -> f64 {
        self.profile.phi0
    }

    /// The same state in normalized scale.
    pub fn normalized(&self) -> FlowState {
        match self.param {
            Parametrization::Normalized => self.clone(),
            Parametrization::Unnormalized => {
                self.rescaled(Parametrization::Normalized, self.s.exp())
            }
        }
    }

    /// The same state in unnormalized scale.
    pub fn unnormalized(&self) -> FlowState {
        match self.param {
            Parametrization::Unnormalized => self.clone(),
            Parametrization::Normalized => {
                self.rescaled(Parametrization::Unnormalized, (-self.s).exp())
            }
        }
    }

    fn rescaled(&self, param: Parametrization, k: f64) -> FlowState {
        FlowState {
            param,
            t: self.t,
            s: self.s,
            profile: self.profile.scaled(k),
            class_now: KahlerClass {
                a: k * self.class_now.a,
                b: k * self.class_now.b,
            },
        }
    }

    /// Time in the state's own parametrization.
    pub fn tau(&self) -> f64 {
        match self.param {
            Parametrization::Normalized => self.s,
            Parametrization::Unnormalized => self.t,
        }
    }
}

fn times_from_tau(param: Parametrization, tau: f64) -> (f64, f64) {
    match param {
        Parametrization::Normalized => (-(-tau).exp_m1(), tau),
        Parametrization::Unnormalized => (tau, -(-tau).ln_1p()),
    }
}

/// Right-hand side `∂φ′` of the flow at the nodes of `state`.
///
/// Normalized states get the `+φ̃′` term. Fails on cone violations.
pub fn rhs_dphi(config: &BundleConfig, state: &FlowState) -> Result<Vec<f64>> {
    let p = &state.profile;
    check_cone(p)?;
    let (n, m) = (config.nf(), config.mf());
    let a = state.class_now.a;
    let kappa = match state.param {
        Parametrization::Normalized => 1.0,
        Parametrization::Unnormalized => 0.0,
    };
    Ok((0..p.len())
        .map(|i| {
            let (x, w, w1) = (p.dphi[i], p.d2phi[i], p.d3phi[i]);
            w1 / w + m * w / x + n * w / (a + x) - (m + 1.0) + kappa * x
        })
        .collect())
}

/// Half-width in ρ of the blend between the two representations of φ′.
const BLEND_HALF_WIDTH: f64 = 3.0;

/// Semi-discrete flow in either parametrization.
///
/// The unknown at node `i` is `v_i = φ′_i − χ_i b(τ)` where the blend `χ` is 0
/// below the midpoint of the profile and 1 above it, switching smoothly over a
/// few units of ρ. So `v = φ′` near the zero section and `v = −(b − φ′)` near
/// the infinity divisor, and both small quantities are stored without
/// cancellation. A smooth switch keeps the time-stepping error smooth in ρ; an
/// abrupt one leaves grid-scale kinks that the fourth-derivative curvature
/// terms amplify. The anchor value of φ is the last component.
pub struct FlowSystem<'a> {
    config: &'a BundleConfig,
    path: &'a ClassPath,
    grid: &'a Grid,
    param: Parametrization,
    st: Stencils,
    blend: Vec<f64>,
    anchor: usize,
}

impl<'a> FlowSystem<'a> {
    /// System whose representation switches around node `center`.
    pub fn new(
        config: &'a BundleConfig,
        path: &'a ClassPath,
        grid: &'a Grid,
        param: Parametrization,
        center: usize,
    ) -> Self {
        let c = grid.rho[center.min(grid.len() - 1)];
        let blend = grid
            .rho
            .iter()
            .map(|r| {
                let x = (r - c + BLEND_HALF_WIDTH) / (2.0 * BLEND_HALF_WIDTH);
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    // C∞ step: the curvature reads four derivatives of the error
                    let f = |t: f64| (-1.0 / t).exp();
                    f(x) / (f(x) + f(1.0 - x))
                }
            })
            .collect();
        FlowSystem {
            config,
            path,
            grid,
            param,
            st: Stencils::new(grid.h),
            blend,
            anchor: grid.anchor(),
        }
    }

    fn class_at(&self, tau: f64) -> KahlerClass {
        match self.param {
            Parametrization::Normalized => self.path.normalized_class(tau),
            Parametrization::Unnormalized => self.path.class_at(tau),
        }
    }

    fn kappa(&self) -> f64 {
        match self.param {
            Parametrization::Normalized => 1.0,
            Parametrization::Unnormalized => 0.0,
        }
    }

    /// Pack a profile into the unknown vector.
    pub fn pack(&self, profile: &Profile) -> Vec<f64> {
        let n = profile.len();
        let mut y = Vec::with_capacity(n + 1);
        for i in 0..n {
            let chi = self.blend[i];
            y.push(if chi == 0.0 {
                profile.dphi[i]
            } else if chi == 1.0 {
                -profile.upper[i]
            } else {
                profile.dphi[i] - chi * profile.b
            });
        }
        y.push(profile.phi0);
        y
    }

    /// φ′ and b − φ′ from the unknown vector at class coefficient `b`.
    fn unpack(&self, y: &[f64], b: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let chi = self.blend[i];
            if chi == 0.0 {
                p[i] = y[i];
                q[i] = b - y[i];
            } else if chi == 1.0 {
                q[i] = -y[i];
                p[i] = b + y[i];
            } else {
                p[i] = y[i] + chi * b;
                q[i] = b - p[i];
            }
        }
        (p, q)
    }

    /// Rebuild a differentiated profile from an unknown vector.
    pub fn profile_at(&self, tau: f64, y: &[f64]) -> Result<Profile> {
        let b = self.class_at(tau).b;
        let (p, q) = self.unpack(y, b);
        let [d2, d3, d4] = derivatives(&p, &q, b, &self.st);
        let n = p.len();
        let profile = Profile {
            grid: self.grid.clone(),
            b,
            phi0: y[n],
            dphi: p,
            upper: q,
            d2phi: d2,
            d3phi: d3,
            d4phi: d4,
        };
        check_cone(&profile)?;
        Ok(profile)
    }

    fn cone_error(&self, i: usize, what: String) -> Error {
        Error::ConeViolation {
            node: i,
            rho: self.grid.rho[i],
            what,
        }
    }

    /// Local data at every node: φ′, b − φ′, φ″, φ‴.
    fn local(
        &self,
        tau: f64,
        y: &[f64],
    ) -> Result<(KahlerClass, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let class = self.class_at(tau);
        let (p, q) = self.unpack(y, class.b);
        for i in 0..p.len() {
            if !(p[i] > 0.0 && q[i] > 0.0) {
                return Err(self.cone_error(i, format!("phi' = {:e}, b - phi' = {:e}", p[i], q[i])));
            }
        }
        let [d2, d3, _] = derivatives(&p, &q, class.b, &self.st);
        for i in 0..p.len() {
            if !(d2[i] > 0.0) {
                return Err(self.cone_error(i, format!("phi'' = {:e}", d2[i])));
            }
        }
        Ok((class, p, q, d2, d3))
    }
}

impl System for FlowSystem<'_> {
    fn dim(&self) -> usize {
        self.grid.len() + 1
    }

    fn bandwidth(&self) -> (usize, usize) {
        (2, 2)
    }

    fn rhs(&self, tau: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (class, p, q, d2, d3) = self.local(tau, y)?;
        let (n, m) = (self.config.nf(), self.config.mf());
        let a = class.a;
        let kappa = self.kappa();
        let db = kappa * class.b - self.path.slope_b;
        let len = p.len();
        for i in 0..len {
            let ratio = d3[i] / d2[i];
            let base = n * d2[i] / (a + p[i]);
            let chi = self.blend[i];
            // grouped so that each tail is free of cancellation
            out[i] = if chi == 1.0 {
                (ratio + 1.0) + m * d2[i] / p[i] + base - kappa * q[i]
            } else {
                (ratio - 1.0) + m * (d2[i] / p[i] - 1.0) + base + kappa * p[i] - chi * db
            };
        }
        // anchor: ∂φ = −u, which in normalized scale reads ∂φ̃ = φ̃ − ũ − N s
        let k = self.anchor;
        let u = -(n * (a + p[k]).ln() + m * p[k].ln() + d2[k].ln()) + (m + 1.0) * self.grid.rho[k];
        out[len] = match self.param {
            Parametrization::Normalized => y[len] - u - self.config.dim() as f64 * tau,
            Parametrization::Unnormalized => -u,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { s: tau });
        }
        Ok(())
    }

    fn jacobian(&self, tau: f64, y: &[f64], jac: &mut Band) -> Result<()> {
        let (class, p, _q, d2, d3) = self.local(tau, y)?;
        let (n, m) = (self.config.nf(), self.config.mf());
        let a = class.a;
        let kappa = self.kappa();
        let len = p.len();
        let h = self.grid.h;
        let [c1, c2] = self.st.d1;
        let [e0, e1, e2] = self.st.d2;
        let w1 = [-c2, -c1, 0.0, c1, c2];
        let w2 = [e2, e1, e0, e1, e2];
        // ∂v_j = ∂φ′_j for every representation, so rows are plain ∂(∂φ′_i)/∂φ′_j
        for i in 0..len {
            let g2 = -d3[i] / (d2[i] * d2[i]) + m / p[i] + n / (a + p[i]);
            let g3 = 1.0 / d2[i];
            let gp = -m * d2[i] / (p[i] * p[i]) - n * d2[i] / ((a + p[i]) * (a + p[i]));
            for (o, (&a1, &a2)) in w1.iter().zip(&w2).enumerate() {
                let j = i as isize + o as isize - 2;
                let mut g = g2 * a1 + g3 * a2;
                if o == 2 {
                    g += gp;
                }
                // fold ghost nodes into the boundary unknown
                let (col, factor) = if j < 0 {
                    (0usize, (j as f64 * h).exp())
                } else if j >= len as isize {
                    (len - 1, (-((j - len as isize + 1) as f64) * h).exp())
                } else {
                    (j as usize, 1.0)
                };
                jac.add(i, col, factor * g);
            }
            jac.add(i, i, kappa);
        }
        jac.add(len, len, kappa);
        Ok(())
    }

    fn magnitude(&self, tau: f64, y: &[f64], out: &mut [f64]) {
        let (p, q) = self.unpack(y, self.class_at(tau).b);
        for i in 0..p.len() {
            out[i] = p[i].abs().min(q[i].abs());
        }
        let k = y.len() - 1;
        out[k] = y[k].abs();
    }
}

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepController {
    /// Linearly implicit ROS2 with error control.
    Implicit { rtol: f64, atol: f64, dt_max: f64 },
    /// Classical RK4 with `dt = σ h² min φ″`.
    Explicit { sigma: f64 },
}

impl Default for StepController {
    fn default() -> Self {
        StepController::Implicit {
            rtol: 1e-5,
            atol: 1e-12,
            dt_max: 0.05,
        }
    }
}

/// Parabolic step limit `σ h² min φ″`.
pub fn cfl_dt(sigma: f64, h: f64, min_d2phi: f64) -> f64 {
    sigma * h * h * min_d2phi
}

/// Counters of an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Stateful stepper carrying the step-size suggestion between calls.
pub struct Stepper<'a> {
    config: &'a BundleConfig,
    path: &'a ClassPath,
    controller: StepController,
    dt_next: f64,
    pub stats: StepStats,
    /// Largest scaled error estimate among accepted steps.
    pub max_error: f64,
}

const DT_MIN: f64 = 1e-14;

impl<'a> Stepper<'a> {
    pub fn new(config: &'a BundleConfig, path: &'a ClassPath, controller: StepController) -> Self {
        Stepper {
            config,
            path,
            controller,
            dt_next: 1e-4,
            stats: StepStats::default(),
            max_error: 0.0,
        }
    }

    /// One accepted step, not going beyond `tau_end`.
    pub fn step(&mut self, state: &FlowState, tau_end: f64) -> Result<FlowState> {
        let grid = &state.profile.grid;
        let sys = FlowSystem::new(
            self.config,
            self.path,
            grid,
            state.param,
            state.profile.midpoint(),
        );
        let tau = state.tau();
        let y = sys.pack(&state.profile);
        match self.controller {
            StepController::Explicit { sigma } => {
                let min_w = state
                    .profile
                    .d2phi
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                let dt = cfl_dt(sigma, grid.h, min_w).min(tau_end - tau);
                let y1 = rk4_step(&sys, tau, &y, dt).map_err(|e| e.at(tau))?;
                self.stats.accepted += 1;
                self.finish(&sys, state.param, tau + dt, &y1)
                    .map_err(|e| e.at(tau + dt))
            }
            StepController::Implicit { rtol, atol, dt_max } => {
                let dim = sys.dim();
                let mut jac = Band::zeros(dim, 2, 2);
                let mut work = Band::zeros(dim, 2, 2);
                let mut last_err: Option<Error> = None;
                loop {
                    let remaining = tau_end - tau;
                    let mut dt = self.dt_next.min(dt_max);
                    let mut truncated = false;
                    if dt >= remaining {
                        dt = remaining;
                        truncated = true;
                    } else if dt > 0.5 * remaining {
                        dt = 0.5 * remaining;
                    }
                    if dt < DT_MIN {
                        let e = last_err.unwrap_or(Error::StepUnderflow { s: tau, dt });
                        return Err(e.at(tau));
                    }
                    let trial = ros2_step(&sys, tau, &y, dt, &mut jac, &mut work);
                    let (err_est, failure) = match trial {
                        Ok(Some(r)) => {
                            let e = error_norm(&sys, tau, dt, &r.err, &y, &r.y, rtol, atol);
                            if e.is_finite() && e <= 1.0 {
                                match self.finish(&sys, state.param, tau + dt, &r.y) {
                                    Ok(next) => {
                                        self.stats.accepted += 1;
                                        self.max_error = self.max_error.max(e);
                                        let grow = if e > 0.0 {
                                            (0.9 / e.sqrt()).clamp(0.2, 3.0)
                                        } else {
                                            3.0
                                        };
                                        let proposed = dt * grow;
                                        self.dt_next = if truncated {
                                            self.dt_next.max(proposed)
                                        } else {
                                            proposed
                                        };
                                        return Ok(next);
                                    }
                                    Err(err) => (e, Some(err)),
                                }
                            } else {
                                (e, None)
                            }
                        }
                        Ok(None) => (f64::INFINITY, None),
                        Err(err) => (f64::INFINITY, Some(err)),
                    };
                    self.stats.rejected += 1;
                    self.dt_next = if failure.is_none() && err_est.is_finite() {
                        dt * (0.9 / err_est.sqrt()).clamp(0.1, 0.9)
                    } else {
                        0.25 * dt
                    };
                    if failure.is_some() {
                        last_err = failure;
                    }
                }
            }
        }
    }

    fn finish(
        &self,
        sys: &FlowSystem,
        param: Parametrization,
        tau: f64,
        y: &[f64],
    ) -> Result<FlowState> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { s: tau });
        }
        let profile = sys.profile_at(tau, y)?;
        let (t, s) = times_from_tau(param, tau);
        let class_now = sys.class_at(tau);
        Ok(FlowState {
            param,
            t,
            s,
            profile,
            class_now,
        })
    }

    /// Integrate until the state's own time reaches `tau_end`.
    pub fn advance_to(&mut self, mut state: FlowState, tau_end: f64) -> Result<FlowState> {
        while state.tau() < tau_end {
            state = self.step(&state, tau_end)?;
        }
        Ok(state)
    }
}

/// One step of the flow with the given controller (fresh step-size history).
pub fn step(
    config: &BundleConfig,
    path: &ClassPath,
    state: &FlowState,
    controller: StepController,
    tau_end: f64,
) -> Result<FlowState> {
    Stepper::new(config, path, controller).step(state, tau_end)
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Failed { s: f64, reason: String },
}

/// Result of [`run`]: snapshots at the scheduled normalized times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: BundleConfig,
    /// Class path after rescaling to singular time 1.
    pub path: ClassPath,
    /// Singular time before rescaling.
    pub original_t_sing: f64,
    pub schedule: Vec<f64>,
    pub snapshots: Vec<FlowState>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn last(&self) -> &FlowState {
        self.snapshots
            .last()
            .expect("a run always has the initial snapshot")
    }

    /// Snapshot taken at normalized time `s`, if scheduled.
    pub fn at(&self, s: f64) -> Option<&FlowState> {
        self.snapshots.iter().find(|st| (st.s - s).abs() < 1e-9)
    }
}

/// Integrate the normalized flow from the canonical seed through `schedule`.
pub fn run(
    config: &BundleConfig,
    class0: KahlerClass,
    grid: &Grid,
    schedule: &[f64],
    controller: StepController,
) -> Result<RunRecord> {
    run_with(config, class0, grid, schedule, controller, |_| Ok(()))
}

/// Like [`run`], calling `hook` on every snapshot as it is produced.
pub fn run_with(
    config: &BundleConfig,
    class0: KahlerClass,
    grid: &Grid,
    schedule: &[f64],
    controller: StepController,
    mut hook: impl FnMut(&FlowState) -> Result<()>,
) -> Result<RunRecord> {
    if schedule.iter().any(|s| !(s.is_finite() && *s >= 0.0))
        || schedule.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::input(
            "time.checkpoint_list",
            "must be increasing, finite and nonnegative",
        ));
    }
    let raw = class_path(config, class0)?;
    let (path, _) = rescale_to_unit_time(&raw, class0);
    let mut state = FlowState::initial(&path, grid.clone(), Parametrization::Normalized)?;
    let mut stepper = Stepper::new(config, &path, controller);
    let mut snapshots = Vec::new();
    let mut termination = Termination::Completed;
    for &target in schedule {
        match stepper.advance_to(state.clone(), target) {
            Ok(next) => {
                state = next;
                hook(&state)?;
                snapshots.push(state.clone());
            }
            Err(e) => {
                termination = Termination::Failed {
                    s: failing_time(&e, state.s),
                    reason: e.to_string(),
                };
                break;
            }
        }
    }
    if snapshots.is_empty() && schedule.is_empty() {
        hook(&state)?;
        snapshots.push(state);
    }
    Ok(RunRecord {
        config: *config,
        path,
        original_t_sing: raw.t_sing,
        schedule: schedule.to_vec(),
        snapshots,
        termination,
        stats: stepper.stats,
    })
}

fn failing_time(e: &Error, fallback: f64) -> f64 {
    match e {
        Error::AtTime { s, .. } => *s,
        _ => fallback,
    }
}
