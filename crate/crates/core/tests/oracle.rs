use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use warpflow::fd_oracle::{self, compare_arrays, AnalyticState, Flavor};
use warpflow::geometry::{riemann_closed, ChartLayout};
use warpflow::{BaseKind, FiberSpec};

fn s1_s2_s3() -> Vec<FiberSpec> {
    vec![FiberSpec::unit(2), FiberSpec::unit(3)]
}

fn sample(base: BaseKind, seed: u64) -> (AnalyticState, warpflow::geometry::ChartPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let st = AnalyticState::random(base, s1_s2_s3(), &mut rng);
    let p = st.random_point(&mut rng);
    (st, p)
}

fn closed_array(st: &AnalyticState, p: &warpflow::geometry::ChartPoint) -> Vec<f64> {
    let pb = st.point_blocks(&p.base_coords);
    let vj = st.warping_jets(&p.base_coords);
    riemann_closed(&st.fibers, &pb, &vj, p).unwrap()
}

#[test]
fn random_circle_states_match_oracle() {
    let rep = fd_oracle::oracle_sweep(BaseKind::CircleS1, &s1_s2_s3(), 12, 7, 1e-3, 1e-6).unwrap();
    assert!(rep.pass, "worst {:e}", rep.worst);
    assert!(rep.samples.iter().all(|s| s.norm_rel_error <= 1e-6 && s.bianchi_defect <= 1e-6));
}

#[test]
fn random_torus_states_match_oracle() {
    let fibers = vec![FiberSpec::unit(2), FiberSpec::new(3, 1.5).unwrap()];
    let rep = fd_oracle::oracle_sweep(BaseKind::TorusT2, &fibers, 12, 11, 1e-3, 1e-6).unwrap();
    assert!(rep.pass, "worst {:e}", rep.worst);
    assert!(rep.samples.iter().all(|s| s.comparison.christoffel_rel_error.unwrap() <= 1e-6));
}

#[test]
fn sweep_is_reproducible() {
    let a = fd_oracle::oracle_sweep(BaseKind::CircleS1, &s1_s2_s3(), 6, 1, 1e-3, 1e-6).unwrap();
    let b = fd_oracle::oracle_sweep(BaseKind::CircleS1, &s1_s2_s3(), 6, 1, 1e-3, 1e-6).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn riemann_norm_matches_fd_frame_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..5 {
        let st = AnalyticState::random(BaseKind::CircleS1, s1_s2_s3(), &mut rng);
        let p = st.random_point(&mut rng);
        let fd = fd_oracle::riemann_fd(&st, &p, 1e-3).unwrap();
        let g = st.metric_at(&AnalyticState::flatten(&p));
        let norm = fd_oracle::frame_norm_sq(&fd.r, &g, fd.n).unwrap();
        let closed = st.point_blocks(&p.base_coords);
        assert!((norm - closed.riemann_norm_sq).abs() <= 1e-6 * closed.riemann_norm_sq);
    }
}

#[test]
fn identical_arrays_pass_with_zero_error() {
    let (st, p) = sample(BaseKind::CircleS1, 3);
    let closed = closed_array(&st, &p);
    let lay = ChartLayout::new(1, &st.fibers);
    let cmp = compare_arrays(&lay, &closed, &closed, 1e-6);
    assert!(cmp.pass);
    assert_eq!(cmp.worst(), 0.0);
}

#[test]
fn injected_fault_is_flagged_by_flavor() {
    let (st, p) = sample(BaseKind::CircleS1, 5);
    let closed = closed_array(&st, &p);
    let lay = ChartLayout::new(1, &st.fibers);
    let n = lay.n;
    // R_{0 1 0 1}: base direction against the first fiber direction.
    let idx = ((0 * n + 1) * n + 0) * n + 1;
    assert!(closed[idx].abs() > 1e-3);
    let mut fd = closed.clone();
    fd[idx] *= 1.0 + 1e-3;
    let cmp = compare_arrays(&lay, &closed, &fd, 1e-6);
    assert!(!cmp.pass);
    assert_eq!(cmp.failing(), vec![Flavor::BaseFiber]);
    assert!(cmp.error(Flavor::BaseFiber) >= 0.9e-3);
}

#[test]
fn oracle_error_decays_at_fourth_order() {
    for seed in [2, 9] {
        let (st, p) = sample(BaseKind::CircleS1, seed);
        let closed = closed_array(&st, &p);
        let lay = ChartLayout::new(1, &st.fibers);
        let err = |h: f64| {
            let fd = fd_oracle::riemann_fd(&st, &p, h).unwrap();
            compare_arrays(&lay, &closed, &fd.r, 1.0).worst()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let order = (e1 / e2).log2();
        assert!((3.5..4.6).contains(&order), "seed {seed}: errors {e1:e} {e2:e}, order {order}");
    }
}

#[test]
fn oracle_rejects_tiny_steps() {
    let (st, p) = sample(BaseKind::CircleS1, 4);
    assert!(fd_oracle::riemann_fd(&st, &p, 1e-9).is_err());
}
