use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::forms::{equivalence_of, generalized_eigenvalues_desc, MetricForms};
use super::splitting::{splitting_estimate, SplittingOptions, SplittingReport};
use super::{resolve_metric, MetricParams, ResolvedMetric};
use crate::cho_model::{attractor_sample, ChoModel, GridSpec, PhysParams, SampleOptions, State, Stepper, TangentFlow};
use crate::error::{Error, Result};
use crate::liouville::{
    contraction_time, evolve_frame_metric, liouville_residual, minimal_dimension, theorem_log_bound, EvolveOptions,
    LinearFlow, MetricFamily,
};
use crate::multilinear::{singular_values_desc, InnerProduct, VectorFrame};

/// The modified metric along a stored base trajectory sampled every `dt`.
/// The rate is the exact derivative along the trajectory, not a difference quotient.
pub struct TrajectoryMetric<'a> {
    forms: &'a MetricForms,
    base: &'a [State],
    dt: f64,
}

impl<'a> TrajectoryMetric<'a> {
    pub fn new(forms: &'a MetricForms, base: &'a [State], dt: f64) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(Self { forms, base, dt })
    }

    fn state(&self, t: f64) -> &State {
        let i = ((t / self.dt).round().max(0.0) as usize).min(self.base.len() - 1);
        &self.base[i]
    }
}

impl MetricFamily for TrajectoryMetric<'_> {
    fn dim(&self) -> usize {
        self.forms.dim()
    }

    fn form_matrix(&self, t: f64) -> DMatrix<f64> {
        self.forms.metric_matrix(self.state(t))
    }

    fn form_rate(&self, t: f64, _h: f64) -> DMatrix<f64> {
        self.forms.metric_rate(self.state(t))
    }
}

/// `Tr_d` of the energy-rate form relative to the metric along one trajectory.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TraceCurves {
    pub times: Vec<f64>,
    /// `traces[i][d − 1]`: sum of the `d` largest eigenvalues of `(M, V)` at `times[i]`.
    pub traces: Vec<Vec<f64>>,
    /// `integrals[i][d − 1] = ∫_0^{times[i]} Tr_d` (trapezoid).
    pub integrals: Vec<Vec<f64>>,
    /// Time averages over the whole span, one per `d`.
    pub averages: Vec<f64>,
    /// Metric equivalence constant over the sampled times.
    pub c: f64,
}

/// Evaluates `Tr_d` for `d = 1..=d_max` at every `stride`-th state of `base`
/// (and at the last one).
pub fn trace_d_along(forms: &MetricForms, base: &[State], dt: f64, stride: usize, d_max: usize) -> Result<TraceCurves> {
    if base.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if d_max == 0 || d_max > forms.dim() {
        return Err(Error::InvalidArgument(format!("d_max = {d_max} must lie in 1..={}", forms.dim())));
    }
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..base.len()).step_by(stride).collect();
    if *idx.last().unwrap() != base.len() - 1 {
        idx.push(base.len() - 1);
    }
    let mut out = TraceCurves { c: 1.0, ..Default::default() };
    for &i in &idx {
        let f = forms.at(&base[i]);
        out.c = out.c.max(equivalence_of(&f.v)?);
        let ev = generalized_eigenvalues_desc(&f.m, &f.v)?;
        let mut acc = 0.0;
        let cum: Vec<f64> = ev[..d_max].iter().map(|x| {
            acc += x;
            acc
        })
        .collect();
        let t = i as f64 * dt;
        let integral = match (out.times.last(), out.traces.last(), out.integrals.last()) {
            (Some(&t0), Some(prev), Some(run)) => {
                (0..d_max).map(|d| run[d] + 0.5 * (t - t0) * (prev[d] + cum[d])).collect()
            }
            _ => vec![0.0; d_max],
        };
        out.times.push(t);
        out.traces.push(cum);
        out.integrals.push(integral);
    }
    let span = out.times.last().unwrap() - out.times[0];
    out.averages = if span > 0.0 {
        out.integrals.last().unwrap().iter().map(|x| x / span).collect()
    } else {
        out.traces[0].clone()
    };
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DimensionOptions {
    pub dt: f64,
    pub sample: SampleOptions,
    pub d_max: usize,
    /// Length of each tangent run from a sample state.
    pub horizon: f64,
    /// Trace curves and singular values are evaluated every `trace_stride` steps.
    pub trace_stride: usize,
    pub reorth_every: usize,
    /// Steps of the metric-frame run used for the Liouville residual.
    pub liouville_steps: usize,
    pub splitting: SplittingOptions,
    pub parallel: bool,
    /// Slack allowed in the measured volume bound.
    pub bound_tol: f64,
    /// `Tr_d` must average below `−trace_tol` to count as contracting.
    pub trace_tol: f64,
}

impl DimensionOptions {
    pub fn new(dt: f64, sample: SampleOptions, d_max: usize, horizon: f64) -> Self {
        Self {
            dt,
            sample,
            d_max,
            horizon,
            trace_stride: 10,
            reorth_every: 10,
            liouville_steps: 200,
            splitting: SplittingOptions::default(),
            parallel: false,
            bound_tol: 1e-6,
            trace_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionStatus {
    /// A dimension with negative averaged trace was found, volumes contracted
    /// below one half, and the measured volume bound held.
    Contracting,
    /// No `d ≤ d_max` contracts, or the horizon was too short.
    Inconclusive,
    /// The measured `ω_d` exceeded the trace bound.
    BoundViolated,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionReport {
    pub schema_version: u32,
    pub note: String,
    pub grid: GridSpec,
    pub phys: PhysParams,
    pub metric: ResolvedMetric,
    pub dt: f64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub sample_energies: Vec<f64>,
    /// `None` when no admissible splitting exists on the samples; see `splitting_failure`.
    pub splitting: Option<SplittingReport>,
    pub splitting_failure: Option<String>,
    /// Metric equivalence constant over every evaluated state.
    pub c: f64,
    pub d_max: usize,
    /// Worst (largest) time-averaged `Tr_d` over the samples, one entry per `d`.
    pub trace_averages: Vec<f64>,
    pub chosen_d: Option<usize>,
    /// Smallest evaluated time with `ω_d ≤ ½` on every sample.
    pub contraction_time: Option<f64>,
    /// Largest `log ω_d(U(T, 0))` over the samples at the contraction time.
    pub log_omega: Option<f64>,
    /// Largest `log ω_d − (d ln c + ∫_0^T Tr_d)` over the samples.
    pub bound_violation: Option<f64>,
    /// Whether `ω_d` measured in the moving metric stays within `c^{±d}` of the fixed one.
    pub sandwich_holds: Option<bool>,
    /// `d ln c + (c C_K − γ d/(2c)) T` with the splitting constants.
    pub formula_log_bound: Option<f64>,
    pub formula_min_d: Option<usize>,
    pub formula_t0: Option<f64>,
    /// Liouville residual of a metric frame on the first sample.
    pub liouville_residual: f64,
    pub status: DimensionStatus,
    pub trace_times: Vec<f64>,
    /// `trace_worst[i][d − 1]`: largest `Tr_d` over samples at `trace_times[i]`.
    pub trace_worst: Vec<Vec<f64>>,
    /// Largest `log ω_d` over samples at `trace_times[i]`, for the chosen (or first) `d`.
    pub log_omega_worst: Vec<f64>,
}

impl DimensionReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time")?;
        for d in 1..=self.d_max {
            write!(w, ",trace_{d}")?;
        }
        writeln!(w, ",log_omega")?;
        for (i, t) in self.trace_times.iter().enumerate() {
            write!(w, "{t}")?;
            for x in &self.trace_worst[i] {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{}", self.log_omega_worst[i])?;
        }
        Ok(())
    }
}

/// One tangent run: trace curves, `log ω_d` for every `d ≤ d_max` at the same
/// times, and the moving-metric `log ω_d`.
struct SampleRun {
    curves: TraceCurves,
    log_omega: Vec<Vec<f64>>,
    log_omega_metric: Vec<Vec<f64>>,
}

fn log_prefix(sv: &[f64], d_max: usize) -> Vec<f64> {
    let mut acc = 0.0;
    sv[..d_max]
        .iter()
        .map(|s| {
            acc += s.ln();
            acc
        })
        .collect()
}

fn measure(forms: &MetricForms, flow: &TangentFlow, opts: &DimensionOptions) -> Result<SampleRun> {
    let dt = opts.dt;
    let base = flow.base();
    let curves = trace_d_along(forms, base, dt, opts.trace_stride, opts.d_max)?;
    let n = flow.dim();
    let mut u = DMatrix::identity(n, n);
    let v0_inv_sqrt = InnerProduct::weighted(forms.metric_matrix(&base[0]))?.inv_sqrt_matrix();
    let mut log_omega = Vec::with_capacity(curves.times.len());
    let mut log_omega_metric = Vec::with_capacity(curves.times.len());
    let mut step = 0usize;
    for &t in &curves.times {
        let target = (t / dt).round() as usize;
        while step < target {
            flow.advance(step as f64 * dt, dt, &mut u, opts.parallel)?;
            step += 1;
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { time: t, what: "propagator became non-finite".into() });
        }
        log_omega.push(log_prefix(&singular_values_desc(&u), opts.d_max));
        let vt = InnerProduct::weighted(forms.metric_matrix(&base[target]))?;
        let moved = vt.sqrt_matrix() * &u * &v0_inv_sqrt;
        log_omega_metric.push(log_prefix(&singular_values_desc(&moved), opts.d_max));
    }
    Ok(SampleRun { curves, log_omega, log_omega_metric })
}

/// Full pipeline: sample the attractor, fix the metric and the splitting,
/// run the tangent flow from each sample and extract the smallest contracting
/// dimension together with the checks of the volume bound.
pub fn dimension_bound(model: Arc<ChoModel>, metric: &MetricParams, opts: &DimensionOptions) -> Result<DimensionReport> {
    let stepper = Stepper::new(model.clone(), opts.dt)?;
    let sample = attractor_sample(&stepper, &opts.sample)?;
    let forms = resolve_metric(&model, metric, &sample.states)?;
    let (split, splitting_failure) = match splitting_estimate(&forms, &sample.states, &sample.times, &opts.splitting) {
        Ok(s) => (Some(s), None),
        Err(e @ Error::SplittingViolated { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let d_max = opts.d_max.min(forms.dim());
    let opts = DimensionOptions { d_max, ..opts.clone() };
    let steps = (opts.horizon / opts.dt).round() as usize;
    if steps == 0 {
        return Err(Error::Config("the tangent horizon must be at least one step".into()));
    }

    let one = |s: &State| -> Result<(TangentFlow, SampleRun)> {
        let flow = TangentFlow::along(stepper.clone(), s, steps)?;
        let run = measure(&forms, &flow, &opts)?;
        Ok((flow, run))
    };
    let runs: Vec<(TangentFlow, SampleRun)> = if opts.parallel {
        sample.states.par_iter().map(one).collect::<Result<_>>()?
    } else {
        sample.states.iter().map(one).collect::<Result<_>>()?
    };

    let c = runs.iter().map(|r| r.1.curves.c).fold(split.as_ref().map_or(1.0, |s| s.c), f64::max);
    let trace_averages: Vec<f64> = (0..d_max)
        .map(|d| runs.iter().map(|r| r.1.curves.averages[d]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let chosen_d = (1..=d_max).find(|&d| trace_averages[d - 1] < -opts.trace_tol);
    let times = runs[0].1.curves.times.clone();
    let worst_at = |i: usize, d: usize, pick: &dyn Fn(&SampleRun) -> &Vec<Vec<f64>>| {
        runs.iter().map(|r| pick(&r.1)[i][d - 1]).fold(f64::NEG_INFINITY, f64::max)
    };
    let d_show = chosen_d.unwrap_or(1);
    let trace_worst: Vec<Vec<f64>> =
        (0..times.len()).map(|i| (1..=d_max).map(|d| worst_at(i, d, &|r| &r.curves.traces)).collect()).collect();
    let log_omega_worst: Vec<f64> = (0..times.len()).map(|i| worst_at(i, d_show, &|r| &r.log_omega)).collect();

    let mut report = DimensionReport {
        schema_version: 1,
        note: "all constants are estimated on the Fourier-Galerkin discretization and its sampled attractor".into(),
        grid: model.grid().spec().clone(),
        phys: model.params().clone(),
        metric: forms.params().clone(),
        dt: opts.dt,
        horizon: steps as f64 * opts.dt,
        sample_times: sample.times.clone(),
        sample_energies: sample.energies.clone(),
        formula_min_d: split.as_ref().map(|s| minimal_dimension(s.c_k, s.gamma, s.c)),
        splitting: split,
        splitting_failure,
        c,
        d_max,
        trace_averages,
        chosen_d,
        contraction_time: None,
        log_omega: None,
        bound_violation: None,
        sandwich_holds: None,
        formula_log_bound: None,
        formula_t0: None,
        liouville_residual: f64::NAN,
        status: DimensionStatus::Inconclusive,
        trace_times: times.clone(),
        trace_worst,
        log_omega_worst,
    };

    let liou_d = chosen_d.unwrap_or(1);
    let liou_steps = opts.liouville_steps.min(steps).max(2);
    let metric_fam = TrajectoryMetric::new(&forms, runs[0].0.base(), opts.dt)?;
    let evolve = EvolveOptions { reorth_every: opts.reorth_every, parallel: opts.parallel, ..EvolveOptions::new(opts.dt, liou_steps) };
    let (_, vt) = evolve_frame_metric(&runs[0].0, &metric_fam, &VectorFrame::canonical(forms.dim(), liou_d)?, &evolve)?;
    report.liouville_residual = liouville_residual(&vt)?;

    report.formula_t0 = match (&report.splitting, chosen_d) {
        (Some(s), Some(d)) => contraction_time(d, c, s.gamma, s.c_k),
        _ => None,
    };
    let Some(d) = chosen_d else {
        return Ok(report);
    };
    let half = 0.5f64.ln();
    let Some(i) = (0..times.len()).find(|&i| report.log_omega_worst[i] <= half) else {
        return Ok(report);
    };
    let t = times[i];
    let mut violation = f64::NEG_INFINITY;
    let mut sandwich = true;
    let dl = d as f64 * c.ln();
    for (_, r) in &runs {
        let lo = r.log_omega[i][d - 1];
        violation = violation.max(lo - (dl + r.curves.integrals[i][d - 1]));
        let diff = r.log_omega_metric[i][d - 1] - lo;
        sandwich &= diff.abs() <= dl + 1e-9;
    }
    report.contraction_time = Some(t);
    report.log_omega = Some(report.log_omega_worst[i]);
    report.bound_violation = Some(violation);
    report.sandwich_holds = Some(sandwich);
    report.formula_log_bound = report.splitting.as_ref().map(|s| theorem_log_bound(d, c, s.gamma, s.c_k, t));
    report.status = if violation <= opts.bound_tol { DimensionStatus::Contracting } else { DimensionStatus::BoundViolated };
    Ok(report)
}
