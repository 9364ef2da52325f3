use approx::assert_relative_eq;
use calabi_core::flow::{rhs_dphi, FlowState, Parametrization};
use calabi_core::profile::{initial_profile, make_grid, BundleConfig, KahlerClass};
use calabi_core::soliton::{
    bracket_c_star, flow_to_momentum, momentum_discrepancy, shoot, shooting_integral,
    soliton_profile, solve_c_star,
};
use calabi_core::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn cfg(m: u32, n: u32) -> BundleConfig {
    BundleConfig::new(n, m, 2.0).unwrap()
}

/// Composite 5-point Gauss–Legendre on `panels` equal panels (order 10).
fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let r = (10.0f64 / 7.0).sqrt();
    let (x1, x2) = ((5.0 - 2.0 * r).sqrt() / 3.0, (5.0 + 2.0 * r).sqrt() / 3.0);
    let s70 = 70f64.sqrt();
    let (w0, w1, w2) = (
        128.0 / 225.0,
        (322.0 + 13.0 * s70) / 900.0,
        (322.0 - 13.0 * s70) / 900.0,
    );
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let c = a + (k as f64 + 0.5) * h;
            let g = |t: f64| f(c + 0.5 * h * t);
            0.5 * h * (w0 * g(0.0) + w1 * (g(x1) + g(-x1)) + w2 * (g(x2) + g(-x2)))
        })
        .sum()
}

fn integrand(m: u32, n: u32, a: f64, c: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| s.powi(m as i32) * (a + s).powi(n as i32) * (-c * s).exp() * ((m + 1) as f64 - s)
}

#[test]
fn c_star_closed_forms() {
    // I = 1/c − 2/c³ and I = 2/c − 1/c² − 2/c³
    assert_relative_eq!(
        solve_c_star(&cfg(0, 1), 1.0).unwrap(),
        2f64.sqrt(),
        max_relative = 1e-10
    );
    assert_relative_eq!(
        solve_c_star(&cfg(0, 1), 2.0).unwrap(),
        (1.0 + 17f64.sqrt()) / 4.0,
        max_relative = 1e-10
    );
}

#[test]
fn bracket_straddles_root() {
    let config = cfg(2, 3);
    let br = bracket_c_star(&config, 0.4).unwrap();
    assert!(shooting_integral(&config, 0.4, br.lo).unwrap() < 0.0);
    assert!(shooting_integral(&config, 0.4, br.hi).unwrap() > 0.0);
    let c = solve_c_star(&config, 0.4).unwrap();
    assert!(br.lo <= c && c <= br.hi);
}

#[test]
fn shooting_integral_matches_quadrature() {
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..20 {
        let (m, n) = (rng.gen_range(0..=3), rng.gen_range(1..=3));
        let a = rng.gen_range(0.2..4.0);
        let c = rng.gen_range(0.3..4.0);
        let f = integrand(m, n, a, c);
        let scale = gauss(&|s: f64| f(s).abs(), 0.0, 80.0 / c, 4000);
        let quad = gauss(&f, 0.0, 80.0 / c, 4000);
        let closed = shooting_integral(&cfg(m, n), a, c).unwrap();
        assert!(
            (closed - quad).abs() <= 1e-10 * scale,
            "m={m} n={n}: {closed} vs {quad}"
        );
    }
}

#[test]
fn profile_matches_direct_quadrature() {
    for (m, n, a) in [(0, 1, 1.0), (1, 2, 0.5), (2, 1, 3.0), (3, 3, 1.7)] {
        let config = cfg(m, n);
        let c = solve_c_star(&config, a).unwrap();
        let sol = soliton_profile(&config, a, c, 100.0, 64).unwrap();
        for x in [0.05, 0.5, 1.0, 2.5] {
            let f = integrand(m, n, a, c);
            let head = gauss(&f, 0.0, x, 200);
            let want = (c * x).exp() * head / (x.powi(m as i32) * (a + x).powi(n as i32));
            assert_relative_eq!(sol.eval(x), want, max_relative = 1e-10);
        }
    }
}

#[test]
fn ode_residual_is_small() {
    for (m, n, a) in [(0, 1, 1.0), (0, 1, 2.0), (1, 1, 1.0), (2, 3, 0.6)] {
        let config = cfg(m, n);
        let c = solve_c_star(&config, a).unwrap();
        let sol = soliton_profile(&config, a, c, 1e3, 4096).unwrap();
        for k in 0..=60 {
            let x = 10f64.powf(-3.0 + 6.0 * k as f64 / 60.0);
            let r = sol.residual(x);
            assert!(r.abs() <= 1e-8, "m={m} n={n} a={a} x={x}: residual {r:e}");
        }
    }
}

#[test]
fn boundary_behaviour() {
    for (m, n, a) in [(0, 1, 1.0), (1, 2, 2.0), (3, 1, 0.3)] {
        let config = cfg(m, n);
        let c = solve_c_star(&config, a).unwrap();
        let sol = soliton_profile(&config, a, c, 1e3, 4096).unwrap();
        assert!((sol.w[0] / sol.x[0] - 1.0).abs() <= 1e-5);
        assert!((sol.asymptotic_slope() * c - 1.0).abs() <= 0.01);
        assert!(sol.w.iter().all(|w| *w > 0.0));
    }
}

#[test]
fn wrong_constant_loses_positivity_or_blows_up() {
    let config = cfg(1, 2);
    let a = 1.2;
    let c = solve_c_star(&config, a).unwrap();
    match soliton_profile(&config, a, 0.95 * c, 1e3, 512) {
        Err(Error::PositivityLoss { .. }) => {}
        other => panic!("expected positivity loss, got {other:?}"),
    }
    assert!(soliton_profile(&config, a, 1.05 * c, 1e3, 512).is_err());
    // at moderate x the too-large constant shows exponential growth
    let x = 30.0;
    let w = shoot(&config, a, 1.05 * c, x).unwrap();
    assert!(w * c / x > 10.0, "{w}");
}

#[test]
fn invalid_parameters_rejected() {
    assert!(matches!(
        solve_c_star(&cfg(0, 1), 0.0),
        Err(Error::InvalidInput { .. })
    ));
    assert!(matches!(
        shooting_integral(&cfg(0, 1), 1.0, -1.0),
        Err(Error::InvalidInput { .. })
    ));
}

#[test]
fn seed_in_momentum_chart() {
    // φ′ = σ gives w = x(1 − x) and ρ = logit x.
    let p = initial_profile(
        KahlerClass::new(1.0, 1.0).unwrap(),
        make_grid(-30.0, 30.0, 2049).unwrap(),
    )
    .unwrap();
    let chart = flow_to_momentum(&p).unwrap();
    for x in [0.01, 0.2, 0.5, 0.77, 0.99] {
        assert_relative_eq!(chart.w_at(x).unwrap(), x * (1.0 - x), max_relative = 1e-9);
        assert_relative_eq!(
            chart.rho_at(x).unwrap(),
            (x / (1.0 - x)).ln(),
            epsilon = 1e-8
        );
    }
    assert!(chart.w_at(1.5).is_none());
}

#[test]
fn soliton_profile_is_stationary_up_to_translation() {
    // The normalized flow moves a soliton by ∂φ̃′ = c* φ̃″.
    let config = BundleConfig::new(1, 0, 2.0).unwrap();
    let a = 1.0;
    let c = solve_c_star(&config, a).unwrap();
    let sol = soliton_profile(&config, a, c, 1e3, 256).unwrap();
    let grid = make_grid(-12.0, 12.0, 3201).unwrap();
    let p = sol.to_profile(grid, 1e9, 1.0).unwrap();
    let state = FlowState {
        param: Parametrization::Normalized,
        t: 0.0,
        s: 0.0,
        class_now: KahlerClass { a, b: 1e9 },
        profile: p.clone(),
    };
    let rhs = rhs_dphi(&config, &state).unwrap();
    let mut worst: f64 = 0.0;
    for i in 20..p.len() - 20 {
        if p.dphi[i] > 20.0 {
            break;
        }
        worst = worst.max((rhs[i] - c * p.d2phi[i]).abs());
    }
    assert!(worst <= 1e-9, "{worst:e}");

    // Same check with φ″, φ‴ from sixth-order differences of the integrated φ′.
    let h = p.grid.h;
    let d = |v: &[f64], i: usize| {
        (45.0 * (v[i + 1] - v[i - 1]) - 9.0 * (v[i + 2] - v[i - 2]) + (v[i + 3] - v[i - 3]))
            / (60.0 * h)
    };
    let d2: Vec<f64> = (3..p.len() - 3).map(|i| d(&p.dphi, i)).collect();
    let mut fd = 0f64;
    for j in 3..d2.len() - 3 {
        let i = j + 3;
        if p.dphi[i] > 20.0 {
            break;
        }
        let (x, w, w1) = (p.dphi[i], d2[j], d(&d2, j));
        let rhs = w1 / w + w / (a + x) - 1.0 + x;
        fd = fd.max((rhs - c * w).abs());
    }
    assert!(fd <= 1e-6, "{fd:e}");

    // and its momentum chart reproduces the closed form
    let chart = flow_to_momentum(&p).unwrap();
    assert!(momentum_discrepancy(&chart, &sol, 0.1, 2.0, 200).unwrap() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // I changes sign exactly once, from negative to positive.
    #[test]
    fn unique_sign_change(m in 0u32..=3, n in 1u32..=3, a in 0.1f64..5.0) {
        let config = cfg(m, n);
        let mut changes = 0;
        let mut prev = shooting_integral(&config, a, 1e-3).unwrap();
        prop_assert!(prev < 0.0);
        for k in 1..=400 {
            let c = 10f64.powf(-3.0 + 6.0 * k as f64 / 400.0);
            let v = shooting_integral(&config, a, c).unwrap();
            if v.signum() != prev.signum() {
                changes += 1;
            }
            prev = v;
        }
        prop_assert_eq!(changes, 1);
    }

    #[test]
    fn soliton_positive(m in 0u32..=3, n in 1u32..=3, a in 0.1f64..5.0) {
        let config = cfg(m, n);
        let c = solve_c_star(&config, a).unwrap();
        let sol = soliton_profile(&config, a, c, 1e3, 512).unwrap();
        prop_assert!(sol.w.iter().all(|w| *w > 0.0 && w.is_finite()));
    }
}
