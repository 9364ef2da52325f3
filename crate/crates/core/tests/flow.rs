mod common;

use calabi_core::flow::{cfl_dt, rhs_dphi, step, Stepper, Termination};
use calabi_core::profile::{differentiate, initial_profile, validate_cone, Profile};
use calabi_core::{
    class_path, make_grid, rescale_to_unit_time, run, BundleConfig, Error, FlowState, KahlerClass,
    Parametrization, SingularityType, StepController,
};
use common::random_profile;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn cfg(n: u32, m: u32, lambda: f64) -> BundleConfig {
    BundleConfig::new(n, m, lambda).unwrap()
}

fn class(a: f64, b: f64) -> KahlerClass {
    KahlerClass::new(a, b).unwrap()
}

#[test]
fn class_path_examples() {
    let p = class_path(&cfg(1, 0, 2.0), class(1.0, 3.0)).unwrap();
    assert_eq!((p.t_sing, p.sing_type), (1.0, SingularityType::Contraction));
    assert!(!p.anticanonical);

    let p = class_path(&cfg(1, 0, 2.0), class(2.0, 2.0)).unwrap();
    assert_eq!((p.t_sing, p.sing_type), (1.0, SingularityType::Collapse));

    let p = class_path(&cfg(1, 0, 2.0), class(1.0, 2.0)).unwrap();
    assert_eq!((p.t_sing, p.sing_type), (1.0, SingularityType::Extinction));
    assert!(p.anticanonical);

    let p = class_path(&cfg(1, 1, 2.0), class(1.0, 1.0)).unwrap();
    assert_eq!(p.slope_a, 0.0);
    assert!((p.t_sing - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(p.sing_type, SingularityType::Collapse);
}

#[test]
fn rescale_examples() {
    let c = cfg(1, 0, 2.0);
    let p = class_path(&c, class(2.0, 6.0)).unwrap();
    assert_eq!((p.slope_a, p.slope_b), (1.0, 2.0));
    let (q, k) = rescale_to_unit_time(&p, class(2.0, 6.0));
    assert_eq!((k.a, k.b, q.t_sing), (1.0, 3.0, 1.0));

    let p = class_path(&c, class(1.0, 3.0)).unwrap();
    let (q, k) = rescale_to_unit_time(&p, class(1.0, 3.0));
    assert_eq!((k.a, k.b), (1.0, 3.0));
    assert_eq!(q, p);

    let c = cfg(1, 1, 2.0);
    let p = class_path(&c, class(1.0, 1.0)).unwrap();
    let (q, k) = rescale_to_unit_time(&p, class(1.0, 1.0));
    assert!((k.a - 3.0).abs() < 1e-14);
    assert_eq!(k.b, 3.0);
    assert_eq!(q.t_sing, 1.0);
}

fn seed_state(b: f64, param: Parametrization) -> FlowState {
    let grid = make_grid(-30.0, 30.0, 2049).unwrap();
    let k = class(1.0, b);
    FlowState {
        param,
        t: 0.0,
        s: 0.0,
        profile: initial_profile(k, grid).unwrap(),
        class_now: k,
    }
}

#[test]
fn seed_rhs_at_origin() {
    let st = seed_state(1.0, Parametrization::Unnormalized);
    let r = rhs_dphi(&cfg(1, 0, 2.0), &st).unwrap();
    let k = st.profile.grid.anchor();
    assert!((r[k] + 5.0 / 6.0).abs() < 1e-14, "{}", r[k]);
}

#[test]
fn rhs_rejects_cone_violation() {
    let mut st = seed_state(1.0, Parametrization::Unnormalized);
    st.profile.d2phi[100] = -1e-3;
    assert!(matches!(
        rhs_dphi(&cfg(1, 0, 2.0), &st),
        Err(Error::ConeViolation { node: 100, .. })
    ));
}

#[test]
fn normalized_rhs_adds_momentum() {
    // ∂_s φ̃′ = ∂_t φ′ + φ̃′ when φ̃ = e^s φ
    let c = cfg(2, 1, 1.5);
    let mut rng = StdRng::seed_from_u64(7);
    let grid = make_grid(-15.0, 15.0, 513).unwrap();
    let p = random_profile(grid, &mut rng);
    let s = 0.7f64;
    let unnorm = FlowState {
        param: Parametrization::Unnormalized,
        t: -(-s).exp_m1(),
        s,
        class_now: class(0.8, p.b),
        profile: p,
    };
    let norm = unnorm.normalized();
    let ru = rhs_dphi(&c, &unnorm).unwrap();
    let rn = rhs_dphi(&c, &norm).unwrap();
    for i in 0..ru.len() {
        let want = ru[i] + norm.profile.dphi[i];
        assert!(
            (rn[i] - want).abs() <= 1e-12 * (1.0 + want.abs()),
            "node {i}: {} vs {want}",
            rn[i]
        );
    }
}

#[test]
fn linearization_matches_frozen_coefficients() {
    // δ(rhs) = g″/φ″ − φ‴g′/φ″² + m(g′/φ′ − φ″g/φ′²) + n(g′/(a+φ′) − φ″g/(a+φ′)²)
    let (n, m, a, b) = (1.0, 1.0, 1.0, 2.0);
    let c = cfg(1, 1, 3.0);
    let base = seed_state(b, Parametrization::Unnormalized);
    let grid = base.profile.grid.clone();
    let bump = |r: f64| {
        let e = (-(r - 0.5) * (r - 0.5)).exp();
        (
            0.1 * e,
            -0.2 * (r - 0.5) * e,
            0.1 * (4.0 * (r - 0.5) * (r - 0.5) - 2.0) * e,
        )
    };
    let eps = 1e-6;
    let perturbed = |sign: f64| {
        let dphi: Vec<f64> = grid
            .rho
            .iter()
            .zip(&base.profile.dphi)
            .map(|(r, p)| p + sign * eps * bump(*r).0)
            .collect();
        let upper: Vec<f64> = grid
            .rho
            .iter()
            .zip(&base.profile.upper)
            .map(|(r, q)| q - sign * eps * bump(*r).0)
            .collect();
        let p = differentiate(&Profile::from_parts(
            grid.clone(),
            b,
            base.profile.phi0,
            dphi,
            upper,
        ))
        .unwrap();
        rhs_dphi(
            &c,
            &FlowState {
                profile: p,
                ..base.clone()
            },
        )
        .unwrap()
    };
    let (plus, minus) = (perturbed(1.0), perturbed(-1.0));
    let p = &base.profile;
    for i in (0..grid.len()).filter(|&i| grid.rho[i].abs() <= 4.0) {
        let (g, g1, g2) = bump(grid.rho[i]);
        let (x, w, w1) = (p.dphi[i], p.d2phi[i], p.d3phi[i]);
        let want = g2 / w - w1 * g1 / (w * w)
            + m * (g1 / x - w * g / (x * x))
            + n * (g1 / (a + x) - w * g / ((a + x) * (a + x)));
        let got = (plus[i] - minus[i]) / (2.0 * eps);
        assert!(
            (got - want).abs() <= 1e-4 * (1.0 + want.abs()),
            "rho {}: {got} vs {want}",
            grid.rho[i]
        );
    }
}

#[test]
fn cfl_formula() {
    let dt = cfl_dt(0.2, 60.0 / 2048.0, 0.25);
    assert!((dt - 4.291534423828125e-5).abs() < 1e-18, "{dt}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rhs_ignores_the_gauge(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let grid = make_grid(-15.0, 15.0, 513).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_profile(grid, &mut rng);
        let st = FlowState { param: Parametrization::Normalized, t: 0.3, s: -(0.7f64).ln(), class_now: class(1.3, p.b), profile: p };
        let mut shifted = st.clone();
        shifted.profile.phi0 += shift;
        let c = cfg(1, 2, 4.0);
        prop_assert_eq!(rhs_dphi(&c, &st).unwrap(), rhs_dphi(&c, &shifted).unwrap());
    }
}

/// Contraction class path on a short grid, rescaled to T = 1.
fn small_problem() -> (BundleConfig, calabi_core::ClassPath, FlowState) {
    let c = cfg(1, 0, 2.0);
    let path = class_path(&c, class(1.0, 3.0)).unwrap();
    let grid = make_grid(-12.0, 12.0, 257).unwrap();
    let st = FlowState::initial(&path, grid, Parametrization::Normalized).unwrap();
    (c, path, st)
}

#[test]
fn explicit_and_implicit_steppers_agree() {
    // the explicit CFL limit is set by the tiny φ″ at the grid ends, so
    // compare over a short interval against a tightly controlled ROS2 run
    let (c, path, st) = small_problem();
    let end = 2e-5;
    let rk = Stepper::new(&c, &path, StepController::Explicit { sigma: 0.2 })
        .advance_to(st.clone(), end)
        .unwrap();
    let ros = Stepper::new(
        &c,
        &path,
        StepController::Implicit {
            rtol: 1e-10,
            atol: 1e-15,
            dt_max: 1e-6,
        },
    )
    .advance_to(st.clone(), end)
    .unwrap();
    let single = step(&c, &path, &st, StepController::Explicit { sigma: 0.2 }, end).unwrap();
    assert!(single.s < end);
    let worst = rk
        .profile
        .dphi
        .iter()
        .zip(&ros.profile.dphi)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn parametrizations_agree() {
    let (c, path, st) = small_problem();
    let ctl = StepController::Implicit {
        rtol: 1e-8,
        atol: 1e-14,
        dt_max: 0.01,
    };
    let s1 = 1.0f64;
    let t1 = -(-s1).exp_m1();
    let norm = Stepper::new(&c, &path, ctl)
        .advance_to(st.clone(), s1)
        .unwrap();
    let mut unnorm_seed = st.clone();
    unnorm_seed.param = Parametrization::Unnormalized;
    let unnorm = Stepper::new(&c, &path, ctl)
        .advance_to(unnorm_seed, t1)
        .unwrap()
        .normalized();
    assert!((unnorm.s - s1).abs() < 1e-12);
    let worst = norm
        .profile
        .dphi
        .iter()
        .zip(&unnorm.profile.dphi)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst:e}");
    assert!((norm.class_now.a - unnorm.class_now.a).abs() < 1e-12);
}

#[test]
fn zero_horizon_gives_the_seed() {
    let c = cfg(1, 0, 2.0);
    let grid = make_grid(-30.0, 30.0, 2049).unwrap();
    let r = run(
        &c,
        class(1.0, 3.0),
        &grid,
        &[0.0],
        StepController::default(),
    )
    .unwrap();
    assert_eq!(r.snapshots.len(), 1);
    assert_eq!(
        r.snapshots[0].profile,
        initial_profile(class(1.0, 3.0), grid).unwrap()
    );
}

#[test]
fn coarse_grid_never_returns_nan() {
    let c = cfg(1, 0, 2.0);
    let grid = make_grid(-30.0, 30.0, 257).unwrap();
    let sched: Vec<f64> = (0..=8).map(f64::from).collect();
    let r = run(
        &c,
        class(1.0, 3.0),
        &grid,
        &sched,
        StepController::default(),
    )
    .unwrap();
    for st in &r.snapshots {
        assert!(st
            .profile
            .dphi
            .iter()
            .chain(&st.profile.d2phi)
            .all(|v| v.is_finite()));
    }
    if let Termination::Failed { reason, .. } = &r.termination {
        assert!(!reason.contains("NaN"), "{reason}");
    }
}

#[test]
fn contraction_benchmark_stays_in_the_cone() {
    let c = cfg(1, 0, 2.0);
    let grid = make_grid(-30.0, 30.0, 2049).unwrap();
    let sched: Vec<f64> = (0..=16).map(|k| 0.5 * f64::from(k)).collect();
    let r = run(
        &c,
        class(1.0, 3.0),
        &grid,
        &sched,
        StepController::default(),
    )
    .unwrap();
    assert!(r.completed(), "{:?}", r.termination);
    assert_eq!(r.snapshots.len(), 17);
    for st in &r.snapshots {
        // classes follow the closed-form path exactly
        assert_eq!(st.class_now, r.path.normalized_class(st.s));
        let report = validate_cone(&st.profile, st.class_now, 1e-2);
        assert!(report.passed(), "s = {}: {report:?}", st.s);
    }
}
