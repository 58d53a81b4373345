use plugflow::analysis::{build_m0, greedy_separated, growth_function, GrowthCurve, MeshConfig};
use plugflow::geom::{angle_diff, CylPoint, Z_MAX};
use plugflow::quotient::{flow_orbit, run_half, Budgets, Direction, PlugSpec};
use plugflow::wilson::{integrate_wilson, Tolerances, WilsonOutcome, WilsonProfile};
use proptest::prelude::*;
use std::f64::consts::TAU;
use std::sync::OnceLock;

fn small_spec(epsilon: f64) -> PlugSpec {
    PlugSpec::generic(epsilon).unwrap().with_budgets(Budgets { t_max: 300.0, max_events: 200 })
}

fn small_curve() -> &'static GrowthCurve {
    static CURVE: OnceLock<GrowthCurve> = OnceLock::new();
    CURVE.get_or_init(|| {
        let spec = PlugSpec::generic(0.0).unwrap();
        let m = build_m0(&spec, &MeshConfig { t_max: 20.0, max_strands: 200, ..Default::default() }).unwrap();
        growth_function(&m, 10.0, 0.1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wilson_flow_keeps_the_radius_and_commutes_with_rotation(
        r in 1.0f64..3.0, th in 0.0f64..TAU, z in -2.0f64..2.0, phi in 0.0f64..TAU, t in 0.0f64..50.0,
    ) {
        let w = WilsonProfile::default();
        let p = CylPoint::new(r, th, z);
        let a = integrate_wilson(&w, p, t, Tolerances::default()).unwrap();
        prop_assert!(a.path.iter().all(|(_, q)| q.r == r));
        let b = integrate_wilson(&w, p.rotate(phi), t, Tolerances::default()).unwrap();
        let (qa, qb) = (a.outcome.point().rotate(phi), b.outcome.point());
        prop_assert!((r * angle_diff(qa.theta, qb.theta)).abs() < 1e-9 && (qa.z - qb.z).abs() < 1e-12);
    }

    #[test]
    fn wilson_entries_off_the_orbits_exit_above_themselves(r in 1.0f64..3.0, th in 0.0f64..TAU) {
        prop_assume!((r - 2.0).abs() > 1e-2);
        let w = WilsonProfile::default();
        match integrate_wilson(&w, CylPoint::new(r, th, -Z_MAX), 1e6, Tolerances::default()).unwrap().outcome {
            WilsonOutcome::Exited { point, .. } => prop_assert!((r * angle_diff(point.theta, th)).abs() < 1e-6),
            other => prop_assert!(false, "not exited: {other:?}"),
        }
    }

    #[test]
    fn packing_is_separated_maximal_and_coarsens(xs in prop::collection::vec(0.0f64..10.0, 1..120), eps in 0.01f64..2.0) {
        let d = |i: usize, j: usize, _k: usize| (xs[i] - xs[j]).abs();
        let fine = greedy_separated(xs.len(), 0..=0, eps, d);
        let coarse = greedy_separated(xs.len(), 0..=0, 2.0 * eps, d);
        for (a, &i) in fine.iter().enumerate() {
            prop_assert!(fine[..a].iter().all(|&j| d(i, j, 0) > eps));
        }
        prop_assert!((0..xs.len()).all(|i| fine.iter().any(|&j| d(i, j, 0) <= eps)));
        // Each coarse point has its own fine point within eps; on a line at most four fine
        // points fit within 2 eps of one coarse point.
        prop_assert!(fine.len() >= coarse.len() && fine.len() <= 4 * coarse.len());
    }

    #[test]
    fn balls_are_nested(i in 0usize..100, j in 0usize..100) {
        let c = small_curve();
        let (a, b) = (i.min(j), i.max(j));
        prop_assert!(c.area[a] <= c.area[b]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_secondary_entry_obeys_the_radius_law(
        r in 1.6f64..2.4, th in 0.0f64..TAU, z in -1.9f64..1.9, eps in prop::sample::select(vec![-0.05, 0.0, 0.05, 0.1]),
    ) {
        let spec = small_spec(eps);
        let p = CylPoint::new(r, th, z);
        prop_assume!(spec.in_tube(&p).is_none());
        let h = run_half(&spec, p, 1.0, &mut ()).unwrap();
        for e in &h.events {
            if let Some(m) = e.radius_margin(eps) {
                prop_assert!(m >= -1e-9, "margin {m} at {:?}", e.pre);
            }
        }
    }

    #[test]
    fn orbits_are_reproducible(r in 1.6f64..2.4, th in 0.0f64..TAU, z in -1.9f64..1.9) {
        let spec = small_spec(0.05);
        let p = CylPoint::new(r, th, z);
        prop_assume!(spec.in_tube(&p).is_none());
        let a = flow_orbit(&spec, p, Direction::Both).unwrap();
        let b = flow_orbit(&spec, p, Direction::Both).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
