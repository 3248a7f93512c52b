use proptest::prelude::*;

use rwdiff::expansion::{catalog, ExpansionModel};
use rwdiff::rng::trajectory_rng;
use rwdiff::spatial::chart::HyperbolicChart;
use rwdiff::spatial::step::{constraint_residual, direction_step, geodesic_move, noise_len};
use rwdiff::spatial::{project_to_manifold, step_spatial, Fiber, SpatialState};
use rwdiff::temporal::scheme::{step_size, step_with};
use rwdiff::temporal::{simulate_temporal, StepParams, TemporalState};

fn model(index: usize) -> ExpansionModel {
    match index {
        0 => catalog("constant", &[]).unwrap(),
        1 => catalog("exponential", &[1.0]).unwrap(),
        2 => catalog("power", &[2.0 / 3.0]).unwrap(),
        3 => catalog("sinh", &[]).unwrap(),
        _ => catalog("big_crunch_radiation", &[]).unwrap(),
    }
}

fn fiber(index: usize) -> Fiber {
    match index {
        0 => Fiber::euclidean(3),
        1 => Fiber::spherical(3),
        2 => Fiber::hyperbolic(3),
        _ => Fiber::hyperbolic(4),
    }
}

/// A generic point of the fiber reached by a geodesic move and a tilt.
fn spread_state(f: &Fiber, psi: f64, tilt: &[f64]) -> SpatialState {
    let moved = geodesic_move(&SpatialState::origin(f), f, psi);
    let xi: Vec<f64> = tilt.iter().copied().take(f.ambient_dim()).collect();
    direction_step(&moved, f, 0.2, &xi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn temporal_step_keeps_a_nonnegative_and_time_advancing(
        m in 0usize..5,
        t in 0.05f64..0.9,
        tdot in 1.0f64..40.0,
        dw in -6.0f64..6.0,
        sigma in 0.2f64..2.0,
        d in 1usize..5,
    ) {
        let model = model(m);
        let p = StepParams::new(sigma, d, 1e-3);
        let t = t * model.t_end().min(2.0);
        let st = TemporalState::from_tdot(&model, 0.0, t, tdot);
        let h = step_size(&st, &model, &p);
        let next = step_with(&st, &model, &p, h, dw).unwrap();
        prop_assert!(next.a() >= 0.0 && next.a().is_finite());
        prop_assert!(next.tdot() >= 1.0);
        prop_assert!(next.t >= st.t + h);
        prop_assert!(next.t < model.t_end());
        prop_assert!(next.pseudo_norm_residual().abs() <= 1e-12);
    }

    #[test]
    fn spatial_step_preserves_the_constraints(
        fi in 0usize..4,
        psi0 in -3.0f64..3.0,
        tilt in prop::collection::vec(-2.0f64..2.0, 5),
        tdot in 1.001f64..20.0,
        dw in -4.0f64..4.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let f = fiber(fi);
        let model = model(1);
        let p = StepParams::new(1.0, f.d, 1e-2);
        let sp = spread_state(&f, psi0, &tilt);
        let before = TemporalState::from_tdot(&model, 0.0, 1.0, tdot);
        let after = step_with(&before, &model, &p, p.ds, dw).unwrap();
        let n = noise_len(&before, &after, &f, &p);
        let mut rng = trajectory_rng(seed, 0);
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let psi = before.spatial_speed() * p.ds;
        let next = step_spatial(&sp, &before, &after, psi, &f, &p, &noise).unwrap();
        prop_assert!(constraint_residual(&next, &f) < 1e-10, "{:?}", next);
    }

    #[test]
    fn projection_is_idempotent(
        fi in 0usize..4,
        psi0 in -2.0f64..2.0,
        tilt in prop::collection::vec(-2.0f64..2.0, 5),
        bump in prop::collection::vec(-1e-3f64..1e-3, 10),
    ) {
        let f = fiber(fi);
        let sp = spread_state(&f, psi0, &tilt);
        let n = f.ambient_dim();
        let x: Vec<f64> = sp.x.iter().zip(&bump[..n]).map(|(a, b)| a + b).collect();
        let th: Vec<f64> = sp.theta.iter().zip(&bump[n..]).map(|(a, b)| a - b).collect();
        let (x1, t1) = project_to_manifold(&x, &th, &f).unwrap();
        let once = SpatialState { x: x1.clone(), theta: t1.clone() };
        prop_assert!(constraint_residual(&once, &f) < 1e-12);
        let (x2, t2) = project_to_manifold(&x1, &t1, &f).unwrap();
        for (a, b) in x1.iter().zip(&x2).chain(t1.iter().zip(&t2)) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn chart_agrees_with_ambient_coordinates(
        psi0 in -3.0f64..3.0,
        tilt in prop::collection::vec(-2.0f64..2.0, 5),
        psi in -2.0f64..2.0,
    ) {
        let f = Fiber::hyperbolic(3);
        let sp = spread_state(&f, psi0, &tilt);
        let chart = HyperbolicChart::from_state(&sp).unwrap();
        let want = geodesic_move(&sp, &f, psi);
        let got = chart.geodesic_move(psi).unwrap().to_state();
        for (a, b) in got.x.iter().zip(&want.x).chain(got.theta.iter().zip(&want.theta)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn path_integrals_are_nondecreasing(m in 0usize..5, seed in any::<u64>(), tdot in 1.0f64..5.0) {
        let model = model(m);
        let p = StepParams::new(1.0, 3, 1e-3);
        let init = TemporalState::from_tdot(&model, 0.0, 0.5 * model.t_end().min(2.0), tdot);
        let path = simulate_temporal(init, &model, &p, 2.0, 1, &mut trajectory_rng(seed, 0));
        prop_assert!(!path.terminated.is_failure());
        for w in path.samples.windows(2) {
            prop_assert!(w[1].s() > w[0].s());
            prop_assert!(w[1].t() > w[0].t());
            prop_assert!(w[1].clock >= w[0].clock);
            prop_assert!(w[1].conformal >= w[0].conformal);
        }
    }
}
