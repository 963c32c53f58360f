//! Lyapunov exponents of the discretized flow by repeated QR in energy
//! coordinates, with smoothly weighted time averages.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cho_model::{State, Stepper};
use crate::error::{Error, Result};
use crate::metric3::{equivalence_of, generalized_eigenvalues_desc, MetricForms};
use crate::multilinear::{orthonormalize, InnerProduct, VectorFrame};

/// `exp(−1/(s(1−s)))` on `(0, 1)`, zero outside.
pub fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// `∫_0^1 bump`, by composite Simpson on 20000 panels.
pub fn bump_integral() -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|i| bump(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * inner
}

/// Largest value of the normalized weight `bump / ∫bump`.
pub fn bump_peak() -> f64 {
    bump(0.5) / bump_integral()
}

#[derive(Clone, Debug)]
pub struct LyapunovOptions {
    pub t_run: f64,
    /// Number of exponents (frame size).
    pub n_exponents: usize,
    pub reorth_every: usize,
    /// `Tr_d` is evaluated every `trace_every` steps.
    pub trace_every: usize,
    /// Largest `d` for which `Tr_d` is recorded; at most `n_exponents`.
    pub d_max: usize,
    pub seed: u64,
    pub parallel: bool,
    /// Slack for the exponent-sum inequality.
    pub tol: f64,
}

impl LyapunovOptions {
    pub fn new(t_run: f64, n_exponents: usize) -> Self {
        Self { t_run, n_exponents, reorth_every: 10, trace_every: 100, d_max: n_exponents, seed: 0, parallel: false, tol: 1e-4 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentCheck {
    pub d: usize,
    pub exponent_sum: f64,
    pub trace_average: f64,
    /// `d ln c · max(weight) / T`, the price of measuring in the fixed norm.
    pub correction: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub horizon: f64,
    pub exponents: Vec<f64>,
    /// The same estimate over the first two thirds of the run.
    pub exponents_partial: Vec<f64>,
    /// Relative change between the two estimates exceeds 1%.
    pub not_converged: bool,
    /// Weighted averages of `Tr_d`, `d = 1..=d_max`.
    pub trace_averages: Vec<f64>,
    pub c: f64,
    pub checks: Vec<ExponentCheck>,
}

impl LyapunovReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

#[derive(Default)]
struct Weighted {
    num: Vec<f64>,
    den: f64,
}

impl Weighted {
    fn new(k: usize) -> Self {
        Self { num: vec![0.0; k], den: 0.0 }
    }

    fn add(&mut self, w: f64, values: &[f64], dt: f64) {
        for (n, v) in self.num.iter_mut().zip(values) {
            *n += w * v;
        }
        self.den += w * dt;
    }

    fn mean(&self) -> Vec<f64> {
        self.num.iter().map(|n| n / self.den).collect()
    }
}

/// Runs the base trajectory from `start` for `t_run` together with a frame of
/// `n_exponents` tangent vectors.
pub fn lyapunov_spectrum(forms: &MetricForms, stepper: &Stepper, start: &State, opts: &LyapunovOptions) -> Result<LyapunovReport> {
    let coords = forms.coords();
    let n = coords.dim();
    let k = opts.n_exponents;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("n_exponents = {k} must lie in 1..={n}")));
    }
    if opts.d_max == 0 || opts.d_max > k {
        return Err(Error::InvalidArgument(format!("d_max = {} must lie in 1..={k}", opts.d_max)));
    }
    if opts.reorth_every == 0 || opts.trace_every == 0 {
        return Err(Error::Config("reorth_every and trace_every must be positive".into()));
    }
    let dt = stepper.dt();
    let steps = (opts.t_run / dt).round() as usize;
    if steps < opts.reorth_every.max(opts.trace_every) {
        return Err(Error::Config(format!("t_run = {} is shorter than one averaging block", opts.t_run)));
    }
    let horizon = steps as f64 * dt;
    let early = 2.0 * horizon / 3.0;
    let id = InnerProduct::identity(n);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start_frame = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let (q, _) = orthonormalize(&VectorFrame::new(start_frame)?, &id)?;
    let mut ws: Vec<State> = q.matrix().column_iter().map(|c| coords.to_state(&c.into_owned())).collect::<Result<_>>()?;

    let mut full = Weighted::new(k);
    let mut part = Weighted::new(k);
    let mut traces = Weighted::new(opts.d_max);
    let mut c: f64 = 1.0;
    let mut x = start.clone();
    let mut last_reorth = 0.0;
    let record_trace = |x: &State, t: f64, traces: &mut Weighted, c: &mut f64| -> Result<()> {
        let f = forms.at(x);
        *c = c.max(equivalence_of(&f.v)?);
        let ev = generalized_eigenvalues_desc(&f.m, &f.v)?;
        let mut acc = 0.0;
        let cum: Vec<f64> = ev[..opts.d_max]
            .iter()
            .map(|v| {
                acc += v;
                acc * opts.trace_every as f64 * dt
            })
            .collect();
        // sample at the block midpoint so the weights integrate symmetrically
        traces.add(bump((t + 0.5 * opts.trace_every as f64 * dt) / horizon), &cum, opts.trace_every as f64 * dt);
        Ok(())
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        if step % opts.trace_every == 0 && step + opts.trace_every <= steps {
            record_trace(&x, t, &mut traces, &mut c)?;
        }
        let (fp0, fp1) = stepper.stage_derivatives(&x);
        x = stepper.step(&x).map_err(|e| match e {
            Error::BlowUp { what, .. } => Error::BlowUp { time: t + dt, what },
            other => other,
        })?;
        ws = if opts.parallel {
            ws.par_iter().map(|w| stepper.tangent_step(w, &fp0, &fp1)).collect()
        } else {
            ws.iter().map(|w| stepper.tangent_step(w, &fp0, &fp1)).collect()
        };
        if (step + 1) % opts.reorth_every == 0 || step + 1 == steps {
            let t_now = (step + 1) as f64 * dt;
            let cols: Vec<DVector<f64>> = ws.iter().map(|w| coords.to_vector(w)).collect();
            let (q, lengths) = orthonormalize(&VectorFrame::from_columns(&cols)?, &id)?;
            let logs: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
            let mid = 0.5 * (last_reorth + t_now);
            let span = t_now - last_reorth;
            full.add(bump(mid / horizon), &logs, span);
            if t_now <= early + 1e-9 * horizon {
                part.add(bump(mid / early), &logs, span);
            }
            last_reorth = t_now;
            ws = q.matrix().column_iter().map(|c| coords.to_state(&c.into_owned())).collect::<Result<_>>()?;
        }
    }

    let exponents = full.mean();
    let exponents_partial = part.mean();
    let not_converged = exponents
        .iter()
        .zip(&exponents_partial)
        .any(|(a, b)| (a - b).abs() > 0.01 * a.abs().max(1e-8));
    let trace_averages = traces.mean();
    let peak = bump_peak();
    let mut checks = Vec::with_capacity(opts.d_max);
    let mut sum = 0.0;
    for d in 1..=opts.d_max {
        sum += exponents[d - 1];
        let correction = d as f64 * c.ln() * peak / horizon;
        let holds = sum <= trace_averages[d - 1] + correction + opts.tol;
        checks.push(ExponentCheck { d, exponent_sum: sum, trace_average: trace_averages[d - 1], correction, holds });
    }
    Ok(LyapunovReport { horizon, exponents, exponents_partial, not_converged, trace_averages, c, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_integral_value() {
        // value from an adaptive Gauss-Kronrod quadrature
        assert_relative_eq!(bump_integral(), 0.007029858406609, max_relative = 1e-9);
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
    }

    #[test]
    fn weighted_mean_of_a_constant() {
        let mut w = Weighted::new(1);
        for i in 0..100 {
            w.add(bump((i as f64 + 0.5) / 100.0), &[0.3 * 0.01], 0.01);
        }
        assert_relative_eq!(w.mean()[0], 0.3, max_relative = 1e-12);
    }
}
