use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cho_model::{
    random_state, simulate, tangent_energy_residual, ChoModel, GridSpec, Nonlinearity, PhysParams, State, Stepper,
};
use crate::error::Result;
use crate::liouville::{
    energy_rate_form, evolve_frame, evolve_frame_metric, liouville_residual, EvolveOptions, FnFlow, FnMetric,
};
use crate::metric3::{resolve_metric, splitting_estimate, validate_splitting, MetricForms, MetricParams, SplittingOptions};
use crate::multilinear::VectorFrame;

#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Residual {
    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value > threshold }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub kind: String,
    pub residuals: Vec<Residual>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(kind: &str, residuals: Vec<Residual>) -> Self {
        let passed = residuals.iter().all(|r| r.passed);
        Self { schema_version: super::SCHEMA_VERSION, kind: kind.into(), residuals, passed }
    }
}

/// Largest coefficient error of the stepper against the closed-form damped
/// oscillator `û'' + û' + (|k|⁴ + α) û = 0`, relative to the largest initial coefficient.
pub fn linear_sector_error(spec: &GridSpec, alpha: f64, dt: f64, horizon: f64, seed: u64) -> Result<f64> {
    let model = Arc::new(ChoModel::new(spec.clone(), PhysParams::new(alpha, Nonlinearity::Zero))?);
    let stepper = Stepper::new(model.clone(), dt)?;
    let start = random_state(&model, 1.0, seed);
    let steps = (horizon / dt).round() as usize;
    let t = steps as f64 * dt;
    let end = stepper.advance(&start, steps)?;
    let scale = start.u.coeffs.iter().chain(&start.ut.coeffs).map(|c| c.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (i, &k2) in model.grid().k2().iter().enumerate() {
        let w2 = k2 * k2 + alpha;
        let (u0, v0) = (start.u.coeffs[i], start.ut.coeffs[i]);
        // roots −½ ± iν of the characteristic polynomial
        let nu = Complex64::new(w2 - 0.25, 0.0).sqrt();
        let (cos, sinc, dsinc) = if nu.norm() < 1e-8 {
            (Complex64::new(1.0, 0.0), Complex64::new(t, 0.0), Complex64::new(1.0, 0.0))
        } else {
            let z = nu * t;
            (z.cos(), z.sin() / nu, z.cos())
        };
        let decay = (-0.5 * t).exp();
        let b = v0 + 0.5 * u0;
        let u = decay * (u0 * cos + b * sinc);
        // derivative of e^{−t/2}(u0 cos νt + b sin(νt)/ν)
        let du = decay * (-0.5 * (u0 * cos + b * sinc) - u0 * nu * nu * sinc + b * dsinc);
        worst = worst.max((u - end.u.coeffs[i]).norm()).max((du - end.ut.coeffs[i]).norm());
    }
    Ok(worst / scale)
}

/// Relative drift of `E + 2∫‖∂_t u‖²_{-1}` over `[0, 1]` from the configured start
/// and from one of twice its amplitude, plus the linear-sector comparison.
///
/// The stronger start puts enough energy in the high modes of the nonlinear
/// products that an aliased discretization shows up in the drift.
pub fn energy_check(model: &Arc<ChoModel>, dt: f64, amplitude: f64, seed: u64) -> Result<Vec<Residual>> {
    let stepper = Stepper::new(model.clone(), dt)?;
    let steps = (1.0 / dt).round() as usize;
    let mut drift = [0.0; 2];
    for (d, amp) in drift.iter_mut().zip([amplitude, 2.0 * amplitude]) {
        let (_, traj) = simulate(&stepper, &random_state(model, amp, seed), steps, 1, false)?;
        *d = traj.energy_drift();
    }
    let linear = linear_sector_error(model.grid().spec(), model.alpha(), dt, 1.0, seed)?;
    Ok(vec![
        Residual::below("energy_identity_relative_drift", drift[0], 1e-6),
        Residual::below("energy_identity_relative_drift_strong", drift[1], 1e-6),
        Residual::below("linear_sector_relative_error", linear, 1e-10),
    ])
}

fn tangent_run(stepper: &Stepper, base: &State, dir: &State, steps: usize) -> Result<(Vec<State>, Vec<State>)> {
    let mut xs = vec![base.clone()];
    let mut ws = vec![dir.clone()];
    let mut w = [dir.clone()];
    for _ in 0..steps {
        let x = stepper.step_with_tangents(xs.last().expect("nonempty"), &mut w)?;
        xs.push(x);
        ws.push(w[0].clone());
    }
    Ok((xs, ws))
}

/// Residual of `½ d/dt‖ξ_w‖²_E = −‖∂_t w‖²_{-1} − (f'(u) w, ∂_t w)` over `[0, 0.2]`,
/// relative to `max ‖ξ_w‖²_E`, at `dt` and `dt/2`.
pub fn tangent_check(model: &Arc<ChoModel>, dt: f64, amplitude: f64, seed: u64) -> Result<Vec<Residual>> {
    let base = random_state(model, amplitude, seed);
    let dir = random_state(model, 1.0, seed.wrapping_add(1));
    let mut rel = Vec::new();
    for h in [dt, dt / 2.0] {
        let stepper = Stepper::new(model.clone(), h)?;
        let (xs, ws) = tangent_run(&stepper, &base, &dir, (0.2 / h).round() as usize)?;
        let scale = ws.iter().map(|w| model.energy_space_norm_sq(w)).fold(0.0, f64::max);
        rel.push(tangent_energy_residual(model, &xs, &ws, h)? / scale);
    }
    Ok(vec![
        Residual::below("tangent_energy_relative_residual", rel[0], 1e-5),
        Residual::above("tangent_energy_convergence_order", (rel[0] / rel[1]).log2(), 1.8),
    ])
}

fn metric_energy_residual(forms: &MetricForms, base: &State, dir: &State, h: f64, horizon: f64) -> Result<f64> {
    let stepper = Stepper::new(forms.model().clone(), h)?;
    let (xs, ws) = tangent_run(&stepper, base, dir, (horizon / h).round() as usize)?;
    let norms = xs.iter().zip(&ws).map(|(x, w)| forms.metric_norm_sq(x, w)).collect::<Result<Vec<f64>>>()?;
    let scale = norms.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut worst: f64 = 0.0;
    for i in 1..xs.len() - 1 {
        let slope = (norms[i + 1] - norms[i - 1]) / (2.0 * h);
        worst = worst.max((slope - 2.0 * forms.rate_form(&xs[i], &ws[i])?).abs());
    }
    Ok(worst / scale)
}

/// Metric energy identity `d/dt‖ξ_w‖²_{E(t)} = 2 M(ξ_w)`, the assembled-matrix
/// identity, and out-of-sample validation of the splitting.
pub fn metric_identity_check(
    model: &Arc<ChoModel>,
    metric: &MetricParams,
    dt: f64,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<Residual>> {
    let samples: Vec<State> = (0..3).map(|j| random_state(model, amplitude, seed.wrapping_add(10 + j))).collect();
    let forms = resolve_metric(model, metric, &samples)?;
    let mut identity: f64 = 0.0;
    for s in &samples {
        let at = forms.at(s);
        let assembled = energy_rate_form(&at.v, &forms.generator(s), &at.v_rate);
        identity = identity.max((&assembled - &at.m).amax() / at.m.amax());
    }
    let dir = random_state(model, 1.0, seed.wrapping_add(2));
    let r1 = metric_energy_residual(&forms, &samples[0], &dir, dt, 0.1)?;
    let r2 = metric_energy_residual(&forms, &samples[0], &dir, dt / 2.0, 0.1)?;
    let split = splitting_estimate(&forms, &samples, &[0.0; 3], &SplittingOptions { seed, ..Default::default() })?;
    let fresh: Vec<State> = (0..2).map(|j| random_state(model, amplitude, seed.wrapping_add(100 + j))).collect();
    let (excess, _) = validate_splitting(&forms, &fresh, split.gamma, split.c1, 500, seed.wrapping_add(7))?;
    let min_eig = samples.iter().chain(&fresh).map(|s| forms.extreme_eigenvalues(s).0).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Residual::above("metric_min_eigenvalue", min_eig, 0.0),
        Residual::below("rate_form_assembly_relative_error", identity, 1e-10),
        Residual::below("metric_energy_relative_residual", r1, 1e-5),
        Residual::above("metric_energy_convergence_order", (r1 / r2).log2(), 1.8),
        Residual::below("splitting_out_of_sample_excess", excess, 1e-8),
    ])
}

/// Random smooth flow `L(t) = A + B sin t + C cos 2t` on `R^n`.
fn random_flow(n: usize, rng: &mut ChaCha8Rng) -> impl Fn(f64) -> DMatrix<f64> + Sync + Clone + 'static {
    let mut draw = || DMatrix::from_fn(n, n, |_, _| 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut *rng));
    let (a, b, c) = (draw(), draw(), draw());
    move |t: f64| &a + &b * t.sin() + &c * (2.0 * t).cos()
}

/// Liouville residuals for random smooth flows in the Euclidean metric and in
/// a smooth time-dependent metric, at `dt` and `dt/2` over `[0, 1]`.
pub fn liouville_check(dt: f64, seed: u64, flows: usize) -> Result<Vec<Residual>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fixed = [0.0f64; 2];
    let mut moving = [0.0f64; 2];
    for j in 0..flows {
        let n = 3 + j % 6;
        let d = 1 + j % 3;
        let gen = random_flow(n, &mut rng);
        let p = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let p = (&p + p.transpose()) * (0.25 / n as f64);
        let (p1, p2) = (p.clone(), p);
        let metric = FnMetric::new(n, move |t| DMatrix::identity(n, n) + &p1 * t.sin())
            .with_rate(move |t| &p2 * t.cos());
        let flow = FnFlow::new(n, gen);
        let frame = VectorFrame::canonical(n, d)?;
        for (k, h) in [dt, dt / 2.0].into_iter().enumerate() {
            let opts = EvolveOptions::new(h, (1.0 / h).round() as usize);
            let (_, tr) = evolve_frame(&flow, &frame, &opts)?;
            fixed[k] = fixed[k].max(liouville_residual(&tr)?);
            let (_, tr) = evolve_frame_metric(&flow, &metric, &frame, &opts)?;
            moving[k] = moving[k].max(liouville_residual(&tr)?);
        }
    }
    Ok(vec![
        Residual::below("liouville_fixed_metric_residual", fixed[0], 1e-5),
        Residual::above("liouville_fixed_metric_order", (fixed[0] / fixed[1]).log2(), 1.8),
        Residual::below("liouville_moving_metric_residual", moving[0], 1e-5),
        Residual::above("liouville_moving_metric_order", (moving[0] / moving[1]).log2(), 1.8),
    ])
}
