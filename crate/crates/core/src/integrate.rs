//! Time integrators for semi-discrete systems `y′ = F(τ, y)`.
//!
//! [`ros2_step`] is the two-stage linearly implicit W-method of Verwer et al.
//! with `γ = 1 + 1/√2`: L-stable, second order for any Jacobian approximation,
//! with an embedded first-order solution for error control. [`rk4_step`] is the
//! classical explicit scheme.

use crate::banded::Band;
use crate::error::Result;

/// A semi-discrete system with a banded Jacobian.
pub trait System {
    fn dim(&self) -> usize;
    fn bandwidth(&self) -> (usize, usize);
    fn rhs(&self, tau: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
    /// Fill `jac` (already zeroed) with ∂F/∂y, or an approximation of it.
    fn jacobian(&self, tau: f64, y: &[f64], jac: &mut Band) -> Result<()>;
    /// Size of each component that the error tolerance is relative to.
    fn magnitude(&self, _tau: f64, y: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            *o = v.abs();
        }
    }
}

pub const ROS2_GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// Outcome of one Rosenbrock step: new state and embedded error vector.
pub struct Ros2Step {
    pub y: Vec<f64>,
    pub err: Vec<f64>,
}

/// One ROS2 step of size `dt`. Returns `Ok(None)` if the stage matrix is singular.
pub fn ros2_step<S: System>(
    sys: &S,
    tau: f64,
    y: &[f64],
    dt: f64,
    jac: &mut Band,
    work: &mut Band,
) -> Result<Option<Ros2Step>> {
    let n = sys.dim();
    jac.clear();
    sys.jacobian(tau, y, jac)?;
    work.assign_shifted(-ROS2_GAMMA * dt, jac);
    if !work.factor() {
        return Ok(None);
    }
    let mut k1 = vec![0.0; n];
    sys.rhs(tau, y, &mut k1)?;
    work.solve(&mut k1);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + dt * k).collect();
    let mut k2 = vec![0.0; n];
    sys.rhs(tau + dt, &y2, &mut k2)?;
    for (a, b) in k2.iter_mut().zip(&k1) {
        *a -= 2.0 * b;
    }
    work.solve(&mut k2);
    let mut out = Vec::with_capacity(n);
    let mut err = Vec::with_capacity(n);
    for i in 0..n {
        out.push(y[i] + dt * (1.5 * k1[i] + 0.5 * k2[i]));
        err.push(0.5 * dt * (k1[i] + k2[i]));
    }
    Ok(Some(Ros2Step { y: out, err }))
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<S: System>(sys: &S, tau: f64, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = sys.dim();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.rhs(tau, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    sys.rhs(tau + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    sys.rhs(tau + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    sys.rhs(tau + dt, &tmp, &mut k4)?;
    Ok((0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Scaled max-norm of an error vector, relative to [`System::magnitude`].
#[allow(clippy::too_many_arguments)]
pub fn error_norm<S: System>(
    sys: &S,
    tau: f64,
    dt: f64,
    err: &[f64],
    y0: &[f64],
    y1: &[f64],
    rtol: f64,
    atol: f64,
) -> f64 {
    let n = err.len();
    let mut m0 = vec![0.0; n];
    let mut m1 = vec![0.0; n];
    sys.magnitude(tau, y0, &mut m0);
    sys.magnitude(tau + dt, y1, &mut m1);
    let mut e: f64 = 0.0;
    for i in 0..n {
        let sc = atol + rtol * m0[i].max(m1[i]);
        e = e.max(err[i].abs() / sc);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y′ = −50 (y − cos τ), mildly stiff and non-autonomous.
    struct Relax;

    impl System for Relax {
        fn dim(&self) -> usize {
            1
        }
        fn bandwidth(&self) -> (usize, usize) {
            (0, 0)
        }
        fn rhs(&self, tau: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -50.0 * (y[0] - tau.cos());
            Ok(())
        }
        fn jacobian(&self, _tau: f64, _y: &[f64], jac: &mut Band) -> Result<()> {
            jac.set(0, 0, -50.0);
            Ok(())
        }
    }

    fn exact(tau: f64) -> f64 {
        // y(0) = 0
        let k = 50.0;
        let c = k * k / (k * k + 1.0);
        c * (tau.cos() + tau.sin() / k) - c * (-k * tau).exp()
    }

    fn solve_fixed(steps: usize, implicit: bool) -> f64 {
        let sys = Relax;
        let dt = 1.0 / steps as f64;
        let mut y = vec![0.0];
        let mut jac = Band::zeros(1, 0, 0);
        let mut work = Band::zeros(1, 0, 0);
        for k in 0..steps {
            let tau = k as f64 * dt;
            y = if implicit {
                ros2_step(&sys, tau, &y, dt, &mut jac, &mut work)
                    .unwrap()
                    .unwrap()
                    .y
            } else {
                rk4_step(&sys, tau, &y, dt).unwrap()
            };
        }
        (y[0] - exact(1.0)).abs()
    }

    #[test]
    fn ros2_is_second_order() {
        // the stiff transient delays the asymptotic regime to dt·|λ| ≲ 0.03
        let e1 = solve_fixed(1600, true);
        let e2 = solve_fixed(3200, true);
        let slope = (e1 / e2).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn rk4_is_fourth_order() {
        let e1 = solve_fixed(200, false);
        let e2 = solve_fixed(400, false);
        let slope = (e1 / e2).log2();
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn ros2_is_stable_far_beyond_explicit_limit() {
        // dt·|λ| = 5: RK4 diverges here
        assert!(solve_fixed(10, true) < 0.1);
        assert!(solve_fixed(10, false) > 1.0);
    }
}
