use criterion::{black_box, criterion_group, criterion_main, Criterion};

use calabi_core::flow::{rhs_dphi, step};
use calabi_core::geometry::scalar_curvature;
use calabi_core::profile::{differentiate, initial_profile, Profile};
use calabi_core::soliton::{soliton_profile, solve_c_star};
use calabi_core::{
    class_path, make_grid, BundleConfig, FlowState, KahlerClass, Parametrization, StepController,
};

fn seed() -> Profile {
    initial_profile(
        KahlerClass { a: 1.0, b: 3.0 },
        make_grid(-30.0, 30.0, 2049).unwrap(),
    )
    .unwrap()
}

fn kernels(c: &mut Criterion) {
    let config = BundleConfig::new(1, 0, 2.0).unwrap();
    let p = seed();
    let bare = Profile::from_parts(p.grid.clone(), p.b, p.phi0, p.dphi.clone(), p.upper.clone());
    c.bench_function("differentiate/2049", |b| {
        b.iter(|| differentiate(black_box(&bare)).unwrap())
    });

    let path = class_path(&config, KahlerClass { a: 1.0, b: 3.0 }).unwrap();
    let state = FlowState::initial(&path, p.grid.clone(), Parametrization::Normalized).unwrap();
    c.bench_function("rhs_dphi/2049", |b| {
        b.iter(|| rhs_dphi(&config, black_box(&state)).unwrap())
    });
    c.bench_function("scalar_curvature/2049", |b| {
        b.iter(|| scalar_curvature(black_box(&state.profile), &config, 1.0).unwrap())
    });
    c.bench_function("ros2_step/2049", |b| {
        b.iter(|| {
            step(
                &config,
                &path,
                black_box(&state),
                StepController::default(),
                1e-3,
            )
            .unwrap()
        })
    });

    c.bench_function("soliton/c_star+profile", |b| {
        b.iter(|| {
            let cs = solve_c_star(&config, black_box(1.0)).unwrap();
            soliton_profile(&config, 1.0, cs, 1e3, 1001).unwrap()
        })
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
