mod common;

use calabi_core::profile::{
    differentiate, initial_profile, make_grid, validate_cone, ConeCheck, KahlerClass, Profile,
};
use calabi_core::Error;
use common::random_profile;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn seed_on(lo: f64, hi: f64, count: usize, b: f64) -> Profile {
    initial_profile(
        KahlerClass::new(1.0, b).unwrap(),
        make_grid(lo, hi, count).unwrap(),
    )
    .unwrap()
}

/// Stencil derivatives of a profile computed from φ′ alone.
fn stencil(p: &Profile) -> Profile {
    differentiate(&Profile::from_parts(
        p.grid.clone(),
        p.b,
        p.phi0,
        p.dphi.clone(),
        p.upper.clone(),
    ))
    .unwrap()
}

fn max_error(p: &Profile) -> [f64; 3] {
    let d = stencil(p);
    let mut e = [0.0f64; 3];
    for i in 0..p.len() {
        e[0] = e[0].max((d.d2phi[i] - p.d2phi[i]).abs());
        e[1] = e[1].max((d.d3phi[i] - p.d3phi[i]).abs());
        e[2] = e[2].max((d.d4phi[i] - p.d4phi[i]).abs());
    }
    e
}

#[test]
fn seed_derivatives_at_origin() {
    let p = seed_on(-30.0, 30.0, 2049, 1.0);
    let d = stencil(&p);
    let k = p.grid.anchor();
    let h4 = p.grid.h.powi(4);
    assert!((d.d2phi[k] - 0.25).abs() < h4, "{}", d.d2phi[k]);
    assert!(d.d3phi[k].abs() < h4, "{}", d.d3phi[k]);
}

#[test]
fn richardson_slope_is_fourth_order() {
    let coarse = max_error(&seed_on(-15.0, 15.0, 513, 1.0));
    let fine = max_error(&seed_on(-15.0, 15.0, 1025, 1.0));
    for k in 0..3 {
        let slope = (coarse[k] / fine[k]).log2();
        assert!(
            slope >= 3.5,
            "derivative {}: slope {slope} ({} -> {})",
            k + 2,
            coarse[k],
            fine[k]
        );
    }
}

#[test]
fn seed_h_vanishes_with_stencils() {
    let d = stencil(&seed_on(-30.0, 30.0, 2049, 2.0));
    let h_max = d.h_quantity().iter().fold(0.0f64, |m, h| m.max(h.abs()));
    assert!(h_max <= 1e-6, "{h_max}");
}

#[test]
fn seed_passes_cone_check() {
    let p = seed_on(-30.0, 30.0, 2049, 1.0);
    let r = validate_cone(&p, KahlerClass::new(1.0, 1.0).unwrap(), 1e-8);
    assert!(r.passed(), "{r:?}");
    assert!(r.lower_defect < 1e-8 && r.upper_defect < 1e-8);
}

#[test]
fn short_grid_fails_lower_ratio() {
    // ratio φ″/φ′ = 1 − σ(ρ), so the defect at ρ = −5 is σ(−5) ≈ 6.7e−3
    let grid = calabi_core::profile::Grid {
        rho: (0..=700).map(|i| -5.0 + 0.05 * i as f64).collect(),
        h: 0.05,
    };
    let seed = initial_profile(KahlerClass::new(1.0, 1.0).unwrap(), grid).unwrap();
    let r = validate_cone(&seed, KahlerClass::new(1.0, 1.0).unwrap(), 1e-6);
    assert_eq!(r.violated, vec![ConeCheck::LowerRatio]);
    assert!((r.lower_defect - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-12);
}

#[test]
fn flat_profile_is_rejected() {
    let g = make_grid(-12.0, 12.0, 257).unwrap();
    let n = g.len();
    let err = differentiate(&Profile::from_dphi(g, 1.0, 0.0, vec![0.5; n])).unwrap_err();
    assert!(matches!(err, Error::ConeViolation { .. }));
}

#[test]
fn differentiate_leaves_dphi_alone() {
    let p = seed_on(-30.0, 30.0, 2049, 3.0);
    let d = stencil(&p);
    assert_eq!(d.dphi, p.dphi);
    assert_eq!(d.upper, p.upper);
    assert!(d.dphi.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn differentiate_is_linear(seed in any::<u64>(), alpha in 0.1f64..2.0, beta in 0.1f64..2.0) {
        let grid = make_grid(-15.0, 15.0, 513).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let p1 = random_profile(grid.clone(), &mut rng);
        let p2 = random_profile(grid.clone(), &mut rng);
        let b = alpha * p1.b + beta * p2.b;
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| alpha * x + beta * y).collect::<Vec<_>>();
        let combo = Profile::from_parts(grid, b, 0.0, mix(&p1.dphi, &p2.dphi), mix(&p1.upper, &p2.upper));
        let (d1, d2, d) = (stencil(&p1), stencil(&p2), stencil(&combo));
        for i in 0..d.len() {
            for (x, y, z) in [
                (d1.d2phi[i], d2.d2phi[i], d.d2phi[i]),
                (d1.d3phi[i], d2.d3phi[i], d.d3phi[i]),
                (d1.d4phi[i], d2.d4phi[i], d.d4phi[i]),
            ] {
                let want = alpha * x + beta * y;
                prop_assert!((z - want).abs() <= 1e-9 * (1.0 + want.abs()), "node {}: {} vs {}", i, z, want);
            }
        }
    }
}
