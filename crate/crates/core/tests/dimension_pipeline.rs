use std::sync::Arc;

use chodim::cho_model::{ChoModel, GridSpec, Nonlinearity, PhysParams, SampleOptions};
use chodim::metric3::{dimension_bound, DimensionOptions, DimensionStatus, MetricParams};

fn options(d_max: usize) -> DimensionOptions {
    let sample = SampleOptions { t_transient: 5.0, t_sample: 1.0, n_samples: 3, seed: 11, initial_amplitude: 1.0 };
    DimensionOptions::new(0.01, sample, d_max, 3.0)
}

fn model(nl: Nonlinearity, forcing: bool) -> Arc<ChoModel> {
    let mut p = PhysParams::new(1.0, nl);
    if forcing {
        p = p.with_forcing(&[1], 0.5, 0.0);
    }
    Arc::new(ChoModel::new(GridSpec::new(1, 64, 8.0), p).unwrap())
}

#[test]
fn linear_problem_with_default_metric_contracts_in_one_dimension() {
    let r = dimension_bound(model(Nonlinearity::Zero, false), &MetricParams::default(), &options(4)).unwrap();
    assert_eq!(r.chosen_d, Some(1));
    assert_eq!(r.status, DimensionStatus::Contracting);
    assert!(r.bound_violation.unwrap() <= 1e-6);
    assert_eq!(r.sandwich_holds, Some(true));
    assert!(r.liouville_residual < 1e-3, "{}", r.liouville_residual);
}

#[test]
fn linear_problem_without_cross_terms_counts_the_neutral_directions() {
    let p = MetricParams { delta: Some(0.0), lweight: Some(0.0), ..Default::default() };
    let r = dimension_bound(model(Nonlinearity::Zero, false), &p, &options(64)).unwrap();
    // 31 stored modes, two real components each, all with a zero eigenvalue
    assert_eq!(r.chosen_d, Some(63));
    assert_eq!(r.c, 1.0);
    assert!(r.splitting.is_none() && r.splitting_failure.is_some());
    assert_eq!(r.status, DimensionStatus::Contracting);
}

#[test]
fn cubic_problem_gives_a_finite_dimension() {
    for forcing in [false, true] {
        let r = dimension_bound(model(Nonlinearity::Cubic, forcing), &MetricParams::default(), &options(8)).unwrap();
        eprintln!("forcing {forcing}: d = {:?}, T = {:?}, c = {}, split = {:?}", r.chosen_d, r.contraction_time, r.c, r.splitting.as_ref().map(|s| (s.gamma, s.c1, s.formula_d)));
        assert!(r.chosen_d.is_some());
        assert_eq!(r.status, DimensionStatus::Contracting);
        if !forcing {
            assert_eq!(r.chosen_d, Some(1));
        }
    }
}

mod lyapunov {
    use super::*;
    use chodim::cho_model::{random_state, Stepper};
    use chodim::lyapunov::{lyapunov_spectrum, LyapunovOptions};
    use chodim::metric3::resolve_metric;

    #[test]
    fn linear_exponents_are_the_damping_rate() {
        let m = model(Nonlinearity::Zero, false);
        let stepper = Stepper::new(m.clone(), 0.01).unwrap();
        let start = random_state(&m, 1.0, 3);
        let forms = resolve_metric(&m, &MetricParams::default(), std::slice::from_ref(&start)).unwrap();
        let t0 = std::time::Instant::now();
        let rep = lyapunov_spectrum(&forms, &stepper, &start, &LyapunovOptions::new(1600.0, 6)).unwrap();
        eprintln!("{:?} {:?} {:?}", t0.elapsed(), rep.exponents, rep.checks);
        for l in &rep.exponents {
            assert!((l + 0.5).abs() < 1e-6, "{l}");
        }
        assert!(!rep.not_converged);
        assert!(rep.all_hold());
    }
}
