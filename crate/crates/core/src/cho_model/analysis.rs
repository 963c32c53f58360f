use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::field::{sobolev_pairing, SpectralField};
use super::model::ChoModel;
use super::stepper::Stepper;
use super::State;
use crate::error::{Error, Result};

fn stamp(e: Error, t: f64) -> Error {
    match e {
        Error::BlowUp { what, .. } => Error::BlowUp { time: t, what },
        other => other,
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Config(format!("duration {duration} must be nonnegative")));
    }
    Ok((duration / dt).round() as usize)
}

/// Energy bookkeeping recorded along a simulated trajectory.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub energy_space_norm: Vec<f64>,
    /// `∫_0^t ‖∂_t u‖²_{Ḣ^{-1}} ds`, trapezoid rule with endpoint-derivative correction.
    pub dissipation_integral: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<State>,
}

impl Trajectory {
    /// `max_t |E(t) + 2∫‖∂_t u‖² − E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.energy
            .iter()
            .zip(&self.dissipation_integral)
            .map(|(e, d)| (e + 2.0 * d - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,energy,energy_space_norm,dissipation_integral")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.times[i], self.energy[i], self.energy_space_norm[i], self.dissipation_integral[i]
            )?;
        }
        Ok(())
    }
}

/// Integrates `steps` steps, recording every `record_every`-th state (and the last).
pub fn simulate(
    stepper: &Stepper,
    start: &State,
    steps: usize,
    record_every: usize,
    keep_states: bool,
) -> Result<(State, Trajectory)> {
    let model = stepper.model();
    let h = stepper.dt();
    let record_every = record_every.max(1);
    let mut traj = Trajectory::default();
    let mut x = start.clone();
    let mut d_prev = model.dissipation(&x);
    let rate0 = model.dissipation_rate(&x).map_err(|e| stamp(e, 0.0))?;
    let mut trap = 0.0;
    let record = |traj: &mut Trajectory, x: &State, t: f64, trap: f64| -> Result<()> {
        let correction = h * h / 12.0 * (model.dissipation_rate(x)? - rate0);
        traj.times.push(t);
        traj.energy.push(model.energy(x)?);
        traj.energy_space_norm.push(model.energy_space_norm(x));
        traj.dissipation_integral.push(trap - correction);
        if keep_states {
            traj.states.push(x.clone());
        }
        Ok(())
    };
    record(&mut traj, &x, 0.0, 0.0)?;
    for n in 1..=steps {
        let t = n as f64 * h;
        x = stepper.step(&x).map_err(|e| stamp(e, t))?;
        let d = model.dissipation(&x);
        trap += 0.5 * h * (d_prev + d);
        d_prev = d;
        if n % record_every == 0 || n == steps {
            record(&mut traj, &x, t, trap).map_err(|e| stamp(e, t))?;
        }
    }
    Ok((x, traj))
}

/// Largest deviation between the centered difference of `½‖ξ_w‖²_E` and
/// `−‖∂_t w‖²_{Ḣ^{-1}} − (f'(u) w, ∂_t w)` along synchronized base and tangent samples.
pub fn tangent_energy_residual(model: &ChoModel, base: &[State], tangent: &[State], dt: f64) -> Result<f64> {
    if base.len() != tangent.len() {
        return Err(Error::DimensionMismatch { expected: base.len(), found: tangent.len() });
    }
    if base.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: base.len() });
    }
    let half_norm: Vec<f64> = tangent.iter().map(|w| 0.5 * model.energy_space_norm_sq(w)).collect();
    let mut worst: f64 = 0.0;
    for i in 1..base.len() - 1 {
        let w = &tangent[i];
        let fprime = model.derivative_values(&base[i].u);
        let rhs = -sobolev_pairing(model.grid(), &w.ut, &w.ut, -1.0)? - model.weighted_pairing(&fprime, &w.u, &w.ut);
        let slope = (half_norm[i + 1] - half_norm[i - 1]) / (2.0 * dt);
        worst = worst.max((slope - rhs).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasidiffReport {
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    /// `‖S(T)(ξ + εh) − S(T)ξ − ε S'(T, ξ) h‖_E`.
    pub remainders: Vec<f64>,
    /// Entries excluded from the fit: `ε < 1e-8` or remainder at the round-off floor.
    pub excluded: Vec<bool>,
    /// Least-squares slope of `log r` against `log ε`; `None` when fewer than two points remain.
    pub slope: Option<f64>,
}

/// Measures how fast the linearization remainder of the time-`T` map vanishes.
pub fn quasidifferential_test(
    stepper: &Stepper,
    base: &State,
    direction: &State,
    horizon: f64,
    epsilons: &[f64],
) -> Result<QuasidiffReport> {
    let model = stepper.model();
    let steps = steps_for(horizon, stepper.dt())?;
    let mut x = base.clone();
    let mut tangent = [direction.clone()];
    for n in 1..=steps {
        x = stepper.step_with_tangents(&x, &mut tangent).map_err(|e| stamp(e, n as f64 * stepper.dt()))?;
    }
    let end_norm = model.energy_space_norm(&x);
    let mut remainders = Vec::new();
    let mut excluded = Vec::new();
    for &eps in epsilons {
        let y = stepper.advance(&base.add_scaled(eps, direction), steps)?;
        let r = model.energy_space_norm(&y.add_scaled(-1.0, &x).add_scaled(-eps, &tangent[0]));
        let floor = 1e-12 * (end_norm + eps * model.energy_space_norm(&tangent[0]));
        excluded.push(eps < 1e-8 || r <= floor);
        remainders.push(r);
    }
    let pts: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(&remainders)
        .zip(&excluded)
        .filter(|(_, ex)| !**ex)
        .map(|((e, r), _)| (e.ln(), r.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(QuasidiffReport { horizon, epsilons: epsilons.to_vec(), remainders, excluded, slope })
}

#[derive(Clone, Debug)]
pub struct SampleOptions {
    pub t_transient: f64,
    pub t_sample: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Scale of the random initial coefficients.
    pub initial_amplitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractorSample {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<State>,
    pub energies: Vec<f64>,
    pub energy_space_norms: Vec<f64>,
    /// Largest `max |u|` over the samples.
    pub sup_u: f64,
    /// Largest `max |∇u|` over the samples.
    pub sup_grad: f64,
}

/// Smooth random state: `c_m ~ A (ξ + iη) / (1 + |m|²)` for both components.
pub fn random_state(model: &ChoModel, amplitude: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = model.grid();
    let mut draw = |grid: &super::Grid| -> SpectralField {
        SpectralField {
            coeffs: grid
                .wavevectors()
                .iter()
                .map(|m| {
                    let m2: f64 = m.iter().map(|&c| (c as f64).powi(2)).sum();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * (amplitude / (1.0 + m2))
                })
                .collect(),
        }
    };
    let u = draw(grid);
    let ut = draw(grid);
    State { u, ut }
}

/// Post-transient snapshots of one seeded trajectory.
pub fn attractor_sample(stepper: &Stepper, opts: &SampleOptions) -> Result<AttractorSample> {
    if !(opts.t_transient > 0.0) {
        return Err(Error::Config("t_transient must be positive".into()));
    }
    if opts.n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    let model = stepper.model();
    let dt = stepper.dt();
    let transient = steps_for(opts.t_transient, dt)?;
    let gap = steps_for(opts.t_sample, dt)?.max(1);
    let mut x = random_state(model, opts.initial_amplitude, opts.seed);
    let mut n = 0usize;
    let advance = |x: &State, k: usize, n: &mut usize| -> Result<State> {
        let mut y = x.clone();
        for _ in 0..k {
            *n += 1;
            y = stepper.step(&y).map_err(|e| stamp(e, *n as f64 * dt))?;
        }
        Ok(y)
    };
    x = advance(&x, transient, &mut n)?;
    let mut out =
        AttractorSample { times: vec![], states: vec![], energies: vec![], energy_space_norms: vec![], sup_u: 0.0, sup_grad: 0.0 };
    for j in 0..opts.n_samples {
        if j > 0 {
            x = advance(&x, gap, &mut n)?;
        }
        let (su, sg) = model.c1_proxy(&x.u);
        out.sup_u = out.sup_u.max(su);
        out.sup_grad = out.sup_grad.max(sg);
        out.times.push(n as f64 * dt);
        out.energies.push(model.energy(&x)?);
        out.energy_space_norms.push(model.energy_space_norm(&x));
        out.states.push(x.clone());
    }
    Ok(out)
}
