//! Shared fixtures: cone-valid profiles with derivatives in closed form.
#![allow(dead_code)]

use calabi_core::profile::{logistic, softplus, Grid, Profile};
use rand::rngs::StdRng;
use rand::Rng;

/// One `tanh` bump in the reparametrisation `ψ(ρ) = ρ + β + Σ α tanh((ρ−c)/w)`.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub alpha: f64,
    pub center: f64,
    pub width: f64,
}

/// `φ′ = b σ(ψ(ρ))` with ψ′ > 0; every derivative is exact.
///
/// The bumps must satisfy `Σ |α|/w < 1` so that ψ is increasing.
pub fn warped_profile(grid: Grid, b: f64, beta: f64, bumps: &[Bump]) -> Profile {
    let n = grid.len();
    let mut p = Profile::from_parts(grid, b, 0.0, vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let r = p.grid.rho[i];
        let mut psi = r + beta;
        let (mut d1, mut d2, mut d3) = (1.0, 0.0, 0.0);
        for bump in bumps {
            let z = (r - bump.center) / bump.width;
            let t = z.tanh();
            let s = 1.0 - t * t;
            let a = bump.alpha;
            let w = bump.width;
            psi += a * t;
            d1 += a / w * s;
            d2 += a / (w * w) * (-2.0 * t * s);
            d3 += a / (w * w * w) * (-2.0 * s * s + 4.0 * t * t * s);
        }
        let sg = logistic(psi);
        let cg = logistic(-psi);
        let s1 = sg * cg;
        let s2 = s1 * (cg - sg);
        let s3 = s1 * (1.0 - 6.0 * sg * cg);
        p.dphi[i] = b * sg;
        p.upper[i] = b * cg;
        p.d2phi[i] = b * s1 * d1;
        p.d3phi[i] = b * (s2 * d1 * d1 + s1 * d2);
        p.d4phi[i] = b * (s3 * d1 * d1 * d1 + 3.0 * s2 * d1 * d2 + s1 * d3);
    }
    // only exact when there are no bumps; fixtures never read φ itself
    let k = p.grid.anchor();
    p.phi0 = b * softplus(p.grid.rho[k] + beta);
    p
}

/// A random warped profile; bumps sit inside `[-6, 6]` and are at least 1.5 wide.
pub fn random_profile(grid: Grid, rng: &mut StdRng) -> Profile {
    let b = rng.gen_range(0.3..4.0);
    let beta = rng.gen_range(-2.0..2.0);
    let k = 1 + (rng.gen::<f64>() * 3.0) as usize;
    let mut bumps = Vec::new();
    for _ in 0..k {
        let width = rng.gen_range(1.5..4.0);
        let alpha = rng.gen_range(-0.9..0.9) * width / k as f64;
        bumps.push(Bump {
            alpha,
            center: rng.gen_range(-6.0..6.0),
            width,
        });
    }
    warped_profile(grid, b, beta, &bumps)
}
