use proptest::prelude::*;
use warpflow::flow_s1::{init_state, rhs_s1, Termination};
use warpflow::stencil::Grid1;
use warpflow::{estimate_t, run_s1, Error, FiberSpec, FlowStateS1, Profile, S1Config, TFitModel};

fn neck_config(m: usize) -> S1Config {
    let fibers = vec![FiberSpec::unit(2), FiberSpec::unit(3)];
    let profiles = vec![Profile::Cosine { a: 0.5, b: 0.45, k: [1.0, 0.0] }, Profile::Constant(2.0)];
    S1Config::new(m, fibers, profiles)
}

#[test]
fn homogeneous_reduction_of_rhs() {
    let m = 32;
    let fibers = vec![FiberSpec::new(2, 1.0).unwrap(), FiberSpec::new(4, 2.5).unwrap()];
    let st = FlowStateS1 { t: 0.0, grid: Grid1::new(m), fibers, phi: vec![1.3; m], v: vec![vec![0.7; m], vec![1.9; m]] };
    let r = rhs_s1(&st).unwrap();
    assert!(r.dv[0].iter().all(|x| (x + 1.0 / 0.7).abs() < 1e-13));
    assert!(r.dv[1].iter().all(|x| (x + 2.5 / 1.9).abs() < 1e-13));
    assert!(r.dphi.iter().all(|x| x.abs() < 1e-13));
}

#[test]
fn exact_cylinder_shrinks_at_the_analytic_rate() {
    let (t_sing, t) = (0.5, 0.3);
    let v = (2.0f64 * (t_sing - t)).sqrt();
    let m = 16;
    let st = FlowStateS1 { t, grid: Grid1::new(m), fibers: vec![FiberSpec::unit(2)], phi: vec![1.0; m], v: vec![vec![v; m]] };
    let r = rhs_s1(&st).unwrap();
    // d/dt √(2(T−t)) = −1/√(2(T−t))
    assert!(r.dv[0].iter().all(|x| (x + 1.0 / v).abs() < 1e-13));
}

#[test]
fn assumptions_on_neck_data() {
    let (_, rep) = init_state(&neck_config(256)).unwrap();
    // (v₂²)_min/(2μ₂) = 4/4 ≥ (v₁²)_max/μ₁ = 0.9025
    assert!(rep.single_fiber_pinching);
    assert!((rep.c1 - 0.95).abs() < 1e-12);
}

#[test]
fn assumptions_on_constant_data() {
    let cfg = S1Config::new(32, vec![FiberSpec::unit(2), FiberSpec::unit(3)], vec![Profile::Constant(1.0), Profile::Constant(3.0)]);
    let (_, rep) = init_state(&cfg).unwrap();
    assert!(rep.single_fiber_pinching && rep.guarantee_cylinder && rep.small_gradient);
}

#[test]
fn steep_initial_gradient_is_flagged() {
    // φ ≡ 1 initially, so (v₁)ₛ² peaks at b² = 1.2.
    let b = 1.2f64.sqrt();
    let cfg = S1Config::new(512, vec![FiberSpec::unit(2)], vec![Profile::Sine { a: 2.0, b, k: [1.0, 0.0] }]);
    let (_, rep) = init_state(&cfg).unwrap();
    assert!((rep.max_grad_sq_v1 - 1.2).abs() < 1e-6);
    assert!(!rep.small_gradient);
}

#[test]
fn neck_pinches_first() {
    let tr = run_s1(&neck_config(256)).unwrap();
    assert_eq!(tr.termination, Termination::EpsStop);
    let first = &tr.records[0];
    let last = tr.records.last().unwrap();
    assert!(last.vmin[0] <= 1e-3 * first.vmin[0] * 1.01);
    let v2min = tr.records.iter().map(|r| r.vmin[1]).fold(f64::INFINITY, f64::min);
    assert!(v2min > 1.9, "{v2min}");
    let fit = tr.t_hat.unwrap();
    assert!((fit.t_hat - 1.278e-3).abs() < 2e-5, "{}", fit.t_hat);
}

#[test]
fn singular_time_from_perturbed_series() {
    let series: Vec<(f64, f64)> = (0..300)
        .map(|i| {
            let t = 0.5 * (1.0 - 0.97f64.powi(i));
            (t, 2.0 * (0.5 - t) + 0.01 * (0.5 - t).powi(2))
        })
        .collect();
    for model in [TFitModel::FixedSlope, TFitModel::FreeSlope] {
        let fit = estimate_t(&series, 1.0, model).unwrap();
        assert!((fit.t_hat - 0.5).abs() <= 1e-3, "{model:?}: {}", fit.t_hat);
    }
}

#[test]
fn flat_series_has_no_singular_time() {
    let series: Vec<(f64, f64)> = (0..40).map(|i| (0.01 * i as f64, 0.8)).collect();
    assert!(matches!(estimate_t(&series, 1.0, TFitModel::FreeSlope), Err(Error::InsufficientData(_))));
    assert!(matches!(estimate_t(&[], 1.0, TFitModel::FreeSlope), Err(Error::InsufficientData(_))));
}

#[test]
fn checkpoints_are_hit_exactly() {
    let mut cfg = S1Config::new(32, vec![FiberSpec::unit(2)], vec![Profile::Constant(1.0)]);
    cfg.checkpoints = vec![0.1, 0.25];
    cfg.t_max = 0.3;
    let tr = run_s1(&cfg).unwrap();
    for c in [0.1, 0.25] {
        assert!(tr.snapshots.iter().any(|s| s.t == c), "no snapshot at {c}");
    }
    assert_eq!(tr.termination, Termination::TimeLimit);
}

#[test]
fn blowup_reports_last_good_state() {
    let mut cfg = S1Config::new(64, vec![FiberSpec::unit(2)], vec![Profile::Cosine { a: 1.0, b: 0.3, k: [1.0, 0.0] }]);
    cfg.fixed_dt = Some(1.0);
    match run_s1(&cfg) {
        Err(Error::BlowupDetected { .. }) | Err(Error::NonPositiveWarping { .. }) => {}
        other => panic!("expected a blow-up, got {:?}", other.map(|t| t.termination)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Homogeneous data shrinks as `v² = v₀² − 2μt` and stays homogeneous.
    #[test]
    fn homogeneous_shrink_is_exact(v0 in 0.5f64..2.0, mu in 0.5f64..3.0, frac in 0.1f64..0.8) {
        let t = frac * v0 * v0 / (2.0 * mu);
        let mut cfg = S1Config::new(16, vec![FiberSpec::new(3, mu).unwrap()], vec![Profile::Constant(v0)]);
        cfg.checkpoints = vec![t];
        cfg.t_max = t;
        let tr = run_s1(&cfg).unwrap();
        let s = tr.snapshots.iter().find(|s| s.t == t).unwrap();
        let exact = (v0 * v0 - 2.0 * mu * t).sqrt();
        for x in &s.v[0] {
            prop_assert!((x - exact).abs() <= 1e-7 * exact);
        }
        prop_assert!(s.phi.iter().all(|p| (p - 1.0).abs() < 1e-14));
    }

    /// `max vₐ` never increases along a run.
    #[test]
    fn maxima_do_not_increase(a in 0.6f64..1.2, b in 0.05f64..0.4, k in 1u32..3) {
        let fibers = vec![FiberSpec::unit(2), FiberSpec::unit(3)];
        let profiles = vec![Profile::Cosine { a, b, k: [k as f64, 0.0] }, Profile::Constant(2.0)];
        let mut cfg = S1Config::new(64, fibers, profiles);
        cfg.eps_stop_rel = 0.2;
        let tr = run_s1(&cfg).unwrap();
        for w in tr.records.windows(2) {
            for f in 0..2 {
                prop_assert!(w[1].vmax[f] <= w[0].vmax[f] * (1.0 + 1e-10));
            }
        }
    }
}
