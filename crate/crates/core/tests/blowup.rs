use calabi_core::blowup::{classify_limit, equator_node, exterior_flatness, type_i_rescale};
use calabi_core::{
    make_grid, run, BundleConfig, Error, FlowState, KahlerClass, Profile, RunRecord, StepController,
};
use proptest::prelude::*;

fn short_run(s_max: f64) -> RunRecord {
    let c = BundleConfig::new(1, 0, 2.0).unwrap();
    let grid = make_grid(-20.0, 20.0, 1025).unwrap();
    let sched: Vec<f64> = (0..=(2.0 * s_max) as u32)
        .map(|k| 0.5 * f64::from(k))
        .collect();
    run(
        &c,
        KahlerClass::new(1.0, 3.0).unwrap(),
        &grid,
        &sched,
        StepController::default(),
    )
    .unwrap()
}

fn close(p: &Profile, q: &Profile, tol: f64) -> bool {
    let rel = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .all(|(a, b)| (a - b).abs() <= tol * (a.abs() + b.abs()))
    };
    rel(&p.dphi, &q.dphi)
        && rel(&p.upper, &q.upper)
        && rel(&p.d2phi, &q.d2phi)
        && (p.b - q.b).abs() <= tol * p.b
}

#[test]
fn rescale_at_zero_is_the_identity() {
    let r = short_run(1.0);
    let st = &r.snapshots[2];
    let out = type_i_rescale(st, 0.0).unwrap();
    let orig = st.unnormalized();
    assert_eq!(out.t, orig.t);
    assert_eq!(out.profile, orig.profile);
    assert!(type_i_rescale(st, 1.0).is_err());
}

#[test]
fn rescale_at_own_time_is_the_normalized_snapshot() {
    let r = short_run(1.0);
    for st in &r.snapshots {
        let out = type_i_rescale(st, st.t).unwrap();
        assert!(out.t.abs() < 1e-15);
        assert!(
            close(&out.profile, &st.normalized().profile, 1e-10),
            "s = {}",
            st.s
        );
        assert!((out.class_now.a - st.normalized().class_now.a).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rescalings_compose(ti in 0.0f64..0.9, tj in 0.0f64..0.9) {
        let r = short_run(0.5);
        let st: &FlowState = r.last();
        let twice = type_i_rescale(&type_i_rescale(st, ti).unwrap(), tj).unwrap();
        let once = type_i_rescale(st, ti + tj * (1.0 - ti)).unwrap();
        prop_assert!((twice.t - once.t).abs() <= 1e-12 * (1.0 + once.t.abs()));
        prop_assert!(close(&twice.profile, &once.profile, 1e-12));
    }
}

#[test]
fn short_horizon_is_inconclusive() {
    let r = short_run(3.0);
    match classify_limit(&r) {
        Err(Error::Inconclusive { s_max }) => assert_eq!(s_max, 3.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn equator_sits_at_half_momentum_on_the_seed() {
    let r = short_run(0.0);
    let p = &r.snapshots[0].profile;
    assert_eq!(p.grid.rho[equator_node(p)], 0.0);
}

#[test]
fn flatness_rejects_points_off_the_grid() {
    let r = short_run(0.5);
    assert!(exterior_flatness(&r, 100.0).is_err());
    let seq = exterior_flatness(&r, 0.0).unwrap();
    assert_eq!(seq.len(), r.snapshots.len());
}
