use nalgebra::DMatrix;
use proptest::prelude::*;

use chodim::liouville::{
    contraction_time, evolve_frame, evolve_frame_metric, liouville_residual, minimal_dimension, propagator, theorem_log_bound,
    theorem_main_bound, volume_bound_check, ConstantFlow, EvolveOptions, FnFlow, FnMetric, IdentityMetric, Splitting,
    TheoremOptions,
};
use chodim::multilinear::VectorFrame;

#[test]
fn diagonal_flow_volume_is_exponential() {
    let flow = ConstantFlow(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -0.2, -1.0])));
    let frame = VectorFrame::canonical(3, 2).unwrap();
    let (_, tr) = evolve_frame(&flow, &frame, &EvolveOptions::new(1e-3, 1000)).unwrap();
    // span{e1, e2} is invariant: log |∧|² grows at 2 (0.3 − 0.2)
    let last = tr.log_volume.last().unwrap();
    assert!((last - 0.2).abs() < 1e-9, "{last}");
    assert!(tr.trace_qlq.iter().all(|t| (t - 0.1).abs() < 1e-12));
    assert!(liouville_residual(&tr).unwrap() < 1e-9);
}

#[test]
fn propagator_of_a_rotation_is_orthogonal() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let u = propagator(&ConstantFlow(a), &EvolveOptions::new(1e-3, 2000)).unwrap();
    let err = (u.transpose() * &u - DMatrix::identity(2, 2)).amax();
    assert!(err < 1e-6, "{err}");
    let (s, c) = 2f64.sin_cos();
    assert!((u[(0, 0)] - c).abs() < 1e-6 && (u[(0, 1)] - s).abs() < 1e-6);
}

#[test]
fn bad_step_is_rejected() {
    let flow = ConstantFlow(DMatrix::identity(2, 2));
    let frame = VectorFrame::canonical(2, 1).unwrap();
    assert!(evolve_frame(&flow, &frame, &EvolveOptions::new(0.0, 10)).is_err());
    assert!(evolve_frame(&flow, &frame, &EvolveOptions::new(-1e-3, 10)).is_err());
}

#[test]
fn formula_constants() {
    assert_eq!(minimal_dimension(0.0, 1.0, 1.0), 1);
    // 2 c² C_K / α = 2·4·1.5/1 = 12 → 13
    assert_eq!(minimal_dimension(1.5, 1.0, 2.0), 13);
    let b = theorem_log_bound(3, 2.0, 1.0, 0.5, 4.0);
    assert!((b - (3.0 * 2f64.ln() + (2.0 * 0.5 - 3.0 / 4.0) * 4.0)).abs() < 1e-14);
    assert!(contraction_time(1, 1.0, 1.0, 1.0).is_none());
    let t0 = contraction_time(2, 1.0, 1.0, 0.0).unwrap();
    assert!((t0 - 2f64.ln()).abs() < 1e-14);
}

#[test]
fn theorem_bound_dominates_the_measured_volume() {
    // dissipative flow with a compact perturbation in the first direction
    let n = 4;
    let mut a = -DMatrix::<f64>::identity(n, n);
    a[(0, 0)] = 0.5;
    a[(1, 2)] = 0.3;
    let mut k = DMatrix::zeros(n, n);
    k[(0, 0)] = 1.5 + 0.3;
    k[(1, 1)] = 0.3;
    k[(2, 2)] = 0.3;
    let split = Splitting { alpha: 1.0, k };
    let opts = TheoremOptions::new(EvolveOptions::new(1e-3, 3000));
    let flow = ConstantFlow(a);
    for d in 1..=n {
        let r = theorem_main_bound(&flow, &IdentityMetric(n), &split, d, &opts).unwrap();
        assert!(r.measured_log_omega <= r.log_bound + 1e-9, "d = {d}: {} > {}", r.measured_log_omega, r.log_bound);
        assert!(r.worst_excess <= 1e-12);
    }
}

#[test]
fn theorem_rejects_a_wrong_splitting() {
    let flow = ConstantFlow(DMatrix::identity(2, 2));
    let split = Splitting { alpha: 1.0, k: DMatrix::zeros(2, 2) };
    let r = theorem_main_bound(&flow, &IdentityMetric(2), &split, 1, &TheoremOptions::new(EvolveOptions::new(1e-2, 10)));
    assert!(matches!(r, Err(chodim::Error::SplittingViolated { .. })));
}

fn flow_entries(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, n * n), prop::collection::vec(-1.0..1.0f64, n * n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_bound_holds_for_smooth_flows(n in 2usize..=5, d_seed in 0usize..5, (a, b) in flow_entries(5)) {
        let d = 1 + d_seed % n;
        let a = DMatrix::from_fn(n, n, |i, j| a[i * 5 + j]);
        let b = DMatrix::from_fn(n, n, |i, j| b[i * 5 + j]);
        let flow = FnFlow::new(n, move |t: f64| &a + &b * t.sin());
        let r = volume_bound_check(&flow, d, &EvolveOptions::new(1e-3, 1000)).unwrap();
        prop_assert!(r.holds(1e-6), "slack {}", r.slack);
    }

    #[test]
    fn metric_liouville_residual_is_small(n in 2usize..=5, (a, p) in flow_entries(5)) {
        let a = DMatrix::from_fn(n, n, |i, j| a[i * 5 + j]);
        let p = DMatrix::from_fn(n, n, |i, j| p[i * 5 + j] + p[j * 5 + i]) * (0.2 / n as f64);
        let (p1, p2) = (p.clone(), p);
        let metric = FnMetric::new(n, move |t| DMatrix::identity(n, n) + &p1 * t.sin()).with_rate(move |t| &p2 * t.cos());
        let frame = VectorFrame::canonical(n, 1 + n / 2).unwrap();
        let (_, tr) = evolve_frame_metric(&ConstantFlow(a), &metric, &frame, &EvolveOptions::new(1e-3, 500)).unwrap();
        prop_assert!(liouville_residual(&tr).unwrap() < 1e-5);
    }
}
