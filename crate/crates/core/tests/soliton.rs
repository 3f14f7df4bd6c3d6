use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use warpflow::soliton::{
    classify_sweep, identity_residuals, normalization_fit, residuals_over, shoot, shoot_with, Classification, RadialSample,
    ShotOptions,
};

#[test]
fn cylinder_shot_is_exact() {
    let s = shoot(SQRT_2, 20.0).unwrap();
    assert_eq!(s.classification, Classification::Cylinder);
    assert!(s.r_end >= 20.0 - 1e-9);
    assert!(s.residuals.max() <= 1e-8, "{:?}", s.residuals);
    assert!(s.normalization_residual <= 1e-8);
    assert!((s.normalization_c - 1.0).abs() <= 1e-8);
    for (r, rho) in s.r.iter().zip(&s.rho) {
        assert!((rho - r).abs() <= 1e-12);
    }
}

#[test]
fn perturbed_cylinder_violates_identity() {
    let s = shoot(SQRT_2 + 0.01, 20.0).unwrap();
    assert_ne!(s.classification, Classification::Cylinder);
    let a = s.residuals.a2_plus_lambda2;
    assert!(a > 1e-3, "|a2+λ2−½| = {a:e}");
}

#[test]
fn small_v0_is_not_cylinder() {
    let s = shoot(1.0, 50.0).unwrap();
    assert_ne!(s.classification, Classification::Cylinder);
}

#[test]
fn invalid_inputs_rejected() {
    assert!(shoot(0.0, 10.0).is_err());
    assert!(shoot(-1.0, 10.0).is_err());
    assert!(shoot(1.0, 150.0).is_err());
    assert!(classify_sweep(&[], 10.0).is_err());
}

#[test]
fn sweep_finds_no_cylinder_off_axis_value() {
    let v0s: Vec<f64> = (0..=12).map(|i| 0.6 + 0.2 * i as f64).filter(|v| (v - SQRT_2).abs() > 1e-6).collect();
    let rep = classify_sweep(&v0s, 50.0).unwrap();
    assert_eq!(rep.entries.len(), v0s.len());
    assert_eq!(rep.unexpected_cylinders, 0);
}

#[test]
fn axis_regularity() {
    for v0 in [0.8, 1.2, 2.0] {
        let s = shoot(v0, 2.0).unwrap();
        assert!((s.axis_rho_ratio - 1.0).abs() < 1e-5);
        assert!(s.axis_vp_over_r.is_finite());
    }
}

#[test]
fn base_tensor_equations_hold_along_shots() {
    let opt = ShotOptions::default();
    for v0 in [0.9, 1.3, 1.6] {
        let s = shoot_with(v0, 3.0, &opt).unwrap();
        let r = s.residuals;
        assert!(r.bt_rr.max(r.bt_tt) < 1e-9, "{r:?}");
        assert!(r.id1.max(r.id2) <= 10.0 * r.bt_rr.max(r.bt_tt).max(1e-12) + 1e-9, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shots_keep_positive_warping(v0 in 0.5f64..3.0) {
        let s = shoot(v0, 5.0).unwrap();
        prop_assert!(s.v.iter().all(|v| *v > 0.0));
        prop_assert!(s.rho.iter().all(|r| *r > 0.0));
        prop_assert!(s.r.windows(2).all(|w| w[1] > w[0]));
    }
}

fn constant_state(v: f64, r: f64) -> RadialSample {
    RadialSample { r, rho: r, rho_p: 1.0, rho_pp: 0.0, v, v_p: 0.0, v_pp: 0.0, f: 0.25 * r * r, f_p: 0.5 * r, f_pp: 0.5 }
}

#[test]
fn analytic_cylinder_has_zero_residuals() {
    let samples: Vec<_> = (1..200).map(|i| constant_state(SQRT_2, 0.1 * i as f64)).collect();
    let res = residuals_over(&samples);
    assert!(res.max() <= 1e-15, "{res:?}");
    let (c, dev) = normalization_fit(&samples);
    assert!((c - 1.0).abs() < 1e-14 && dev < 1e-13);
}

#[test]
fn perturbed_constant_state_residual() {
    // frozen: |1/v² − ½| at v = √2 + 0.01
    let res = constant_state(SQRT_2 + 0.01, 1.0).residuals();
    assert!((res.a2_plus_lambda2 - 7.0e-3).abs() < 5e-5, "{}", res.a2_plus_lambda2);
}

#[test]
fn stored_profiles_reproduce_residuals() {
    let s = shoot(1.2, 3.0).unwrap();
    let again = identity_residuals(&s);
    assert_eq!(again.max(), s.residuals.max());
}
