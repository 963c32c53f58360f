//! Frames of solutions of `dφ/dt = L(t) φ`: volume tracking in fixed and
//! time-dependent metrics, the Liouville identity and the volume-contraction
//! bound built on top of it.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multilinear::{
    gram, omega_d, orthonormalize, singular_values_desc, symmetric_eigenvalues_desc, symmetrize, trace_d,
    trace_form, DenseOperator, InnerProduct, VectorFrame,
};

/// A nonautonomous linear system `dφ/dt = L(t) φ` on `R^dim`.
pub trait LinearFlow: Sync {
    fn dim(&self) -> usize;

    fn generator(&self, t: f64) -> DMatrix<f64>;

    /// Advances every column of `state` from `t` to `t + dt`.
    ///
    /// The default is the classical four-stage Runge-Kutta scheme. Columns are
    /// processed independently, so the parallel and serial paths give
    /// bit-identical results.
    fn advance(&self, t: f64, dt: f64, state: &mut DMatrix<f64>, parallel: bool) -> Result<()> {
        let l0 = self.generator(t);
        let lh = self.generator(t + 0.5 * dt);
        let l1 = self.generator(t + dt);
        let step = |x: DVector<f64>| -> DVector<f64> {
            let k1 = &l0 * &x;
            let k2 = &lh * (&x + &k1 * (0.5 * dt));
            let k3 = &lh * (&x + &k2 * (0.5 * dt));
            let k4 = &l1 * (&x + &k3 * dt);
            x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
        };
        let cols: Vec<DVector<f64>> = if parallel {
            (0..state.ncols()).into_par_iter().map(|j| step(state.column(j).into_owned())).collect()
        } else {
            (0..state.ncols()).map(|j| step(state.column(j).into_owned())).collect()
        };
        for (j, c) in cols.into_iter().enumerate() {
            state.set_column(j, &c);
        }
        Ok(())
    }
}

/// A flow given by a closure `t -> L(t)`.
pub struct FnFlow<F: Fn(f64) -> DMatrix<f64> + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> DMatrix<f64> + Sync> FnFlow<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> DMatrix<f64> + Sync> LinearFlow for FnFlow<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn generator(&self, t: f64) -> DMatrix<f64> {
        (self.f)(t)
    }
}

/// An autonomous flow with a fixed generator.
pub struct ConstantFlow(pub DMatrix<f64>);

impl LinearFlow for ConstantFlow {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn generator(&self, _t: f64) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// A family of inner products `<x, y>_t = x^T V(t) y`.
pub trait MetricFamily: Sync {
    fn dim(&self) -> usize;

    fn form_matrix(&self, t: f64) -> DMatrix<f64>;

    /// `dV/dt`. The default is a centered difference with step `h`.
    fn form_rate(&self, t: f64, h: f64) -> DMatrix<f64> {
        (self.form_matrix(t + h) - self.form_matrix(t - h)) / (2.0 * h)
    }

    fn form_at(&self, t: f64) -> Result<InnerProduct> {
        InnerProduct::weighted(self.form_matrix(t)).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eigenvalue, .. } => {
                Error::NotPositiveDefinite { context: format!("metric at t = {t}"), min_eigenvalue }
            }
            other => other,
        })
    }
}

/// The constant Euclidean metric.
pub struct IdentityMetric(pub usize);

impl MetricFamily for IdentityMetric {
    fn dim(&self) -> usize {
        self.0
    }
    fn form_matrix(&self, _t: f64) -> DMatrix<f64> {
        DMatrix::identity(self.0, self.0)
    }
    fn form_rate(&self, _t: f64, _h: f64) -> DMatrix<f64> {
        DMatrix::zeros(self.0, self.0)
    }
    fn form_at(&self, _t: f64) -> Result<InnerProduct> {
        Ok(InnerProduct::identity(self.0))
    }
}

type MatrixFn = Box<dyn Fn(f64) -> DMatrix<f64> + Sync>;

/// A metric given by closures; the rate falls back to centered differences.
pub struct FnMetric {
    dim: usize,
    form: MatrixFn,
    rate: Option<MatrixFn>,
}

impl FnMetric {
    pub fn new(dim: usize, form: impl Fn(f64) -> DMatrix<f64> + Sync + 'static) -> Self {
        Self { dim, form: Box::new(form), rate: None }
    }

    pub fn with_rate(mut self, rate: impl Fn(f64) -> DMatrix<f64> + Sync + 'static) -> Self {
        self.rate = Some(Box::new(rate));
        self
    }
}

impl MetricFamily for FnMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn form_matrix(&self, t: f64) -> DMatrix<f64> {
        (self.form)(t)
    }
    fn form_rate(&self, t: f64, h: f64) -> DMatrix<f64> {
        match &self.rate {
            Some(r) => r(t),
            None => (self.form_matrix(t + h) - self.form_matrix(t - h)) / (2.0 * h),
        }
    }
}

/// Smallest `c ≥ 1` with `c^{-1}|x|² ≤ x^T V(t) x ≤ c|x|²` over the sampled times.
pub fn equivalence_constant(metric: &dyn MetricFamily, times: &[f64]) -> Result<f64> {
    let mut c: f64 = 1.0;
    for &t in times {
        let (lo, hi) = metric.form_at(t)?.extreme_eigenvalues();
        c = c.max(hi).max(1.0 / lo);
    }
    Ok(c)
}

/// `M(t) = (V L)^{sym} + ½ dV/dt`: the quadratic form of `½ d/dt |φ|²_{V(t)}`.
pub fn energy_rate_form(v: &DMatrix<f64>, l: &DMatrix<f64>, v_rate: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(v * l)) + v_rate * 0.5
}

/// Riesz representative `V^{-1} M` of a form `M` in the inner product `V`.
pub fn riesz_representative(v: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(v.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        context: "Riesz representative".into(),
        min_eigenvalue: symmetric_eigenvalues_desc(v).last().copied().unwrap_or(f64::NAN),
    })?;
    Ok(chol.solve(m))
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub dt: f64,
    pub steps: usize,
    pub reorth_every: usize,
    pub parallel: bool,
}

impl EvolveOptions {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self { dt, steps, reorth_every: 10, parallel: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if self.reorth_every == 0 {
            return Err(Error::InvalidArgument("reorth_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time series recorded along a frame evolution.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VolumeTrace {
    pub times: Vec<f64>,
    /// `log |φ_1 ∧ … ∧ φ_d|²`.
    pub log_volume: Vec<f64>,
    /// `Tr(Q L Q)` on the span of the frame.
    pub trace_qlq: Vec<f64>,
    /// `Tr_d` of the generator, `d` the frame size.
    pub trace_d: Vec<f64>,
    /// Running trapezoid integral of `trace_qlq`.
    pub trace_integral: Vec<f64>,
    /// Running trapezoid integral of `trace_d`.
    pub trace_d_integral: Vec<f64>,
}

impl VolumeTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, log_volume: f64, tr: f64, trd: f64) {
        let (ti, tdi) = match (self.times.last(), self.trace_qlq.last(), self.trace_d.last()) {
            (Some(&t0), Some(&a), Some(&b)) => {
                let h = t - t0;
                (
                    self.trace_integral.last().unwrap() + 0.5 * h * (a + tr),
                    self.trace_d_integral.last().unwrap() + 0.5 * h * (b + trd),
                )
            }
            _ => (0.0, 0.0),
        };
        self.times.push(t);
        self.log_volume.push(log_volume);
        self.trace_qlq.push(tr);
        self.trace_d.push(trd);
        self.trace_integral.push(ti);
        self.trace_d_integral.push(tdi);
    }

    /// Upper bound on `log_volume` predicted by the d-trace: `log_volume(0) + 2∫Tr_d`.
    pub fn bound_rhs(&self) -> Vec<f64> {
        let v0 = self.log_volume.first().copied().unwrap_or(0.0);
        self.trace_d_integral.iter().map(|x| v0 + 2.0 * x).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,log_volume,trace_QLQ,trace_d,bound_rhs")?;
        let rhs = self.bound_rhs();
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.times[i], self.log_volume[i], self.trace_qlq[i], self.trace_d[i], rhs[i]
            )?;
        }
        Ok(())
    }
}

fn log_gram_det(frame: &VectorFrame, form: &InnerProduct) -> Result<f64> {
    let det = gram(frame, form)?.determinant();
    if !(det > 0.0) {
        return Err(Error::DegenerateFrame { wedge_norm: det.max(0.0).sqrt() });
    }
    Ok(det.ln())
}

fn check_finite(state: &DMatrix<f64>, t: f64) -> Result<()> {
    if state.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { time: t, what: "frame vector became non-finite".into() })
    }
}

/// Per-time quantities for the frame recorder: the operator whose trace is
/// recorded and the form in which volumes are measured.
struct Snapshot {
    op: DenseOperator,
    form: InnerProduct,
}

fn evolve_generic(
    flow: &dyn LinearFlow,
    frame0: &VectorFrame,
    opts: &EvolveOptions,
    snapshot: &dyn Fn(f64) -> Result<Snapshot>,
) -> Result<(VectorFrame, VolumeTrace)> {
    opts.validate()?;
    if frame0.ambient_dim() != flow.dim() {
        return Err(Error::DimensionMismatch { expected: flow.dim(), found: frame0.ambient_dim() });
    }
    let d = frame0.len();
    let mut state = frame0.matrix().clone();
    let mut offset = 0.0;
    let mut trace = VolumeTrace::default();
    for step in 0..=opts.steps {
        let t = step as f64 * opts.dt;
        let snap = snapshot(t)?;
        let frame = VectorFrame::new(state.clone())?;
        let lv = offset + log_gram_det(&frame, &snap.form)?;
        let tr = trace_form(&snap.op, &frame, &snap.form)?;
        let trd = trace_d(&snap.op, d, &snap.form)?;
        trace.push(t, lv, tr, trd);
        if step == opts.steps {
            break;
        }
        flow.advance(t, opts.dt, &mut state, opts.parallel)?;
        check_finite(&state, t + opts.dt)?;
        if (step + 1) % opts.reorth_every == 0 && step + 1 < opts.steps {
            let form = snapshot(t + opts.dt)?.form;
            let (q, lengths) = orthonormalize(&VectorFrame::new(state)?, &form)?;
            offset += 2.0 * lengths.iter().map(|x| x.ln()).sum::<f64>();
            state = q.into_matrix();
        }
    }
    Ok((VectorFrame::new(state)?, trace))
}

/// Evolves a frame in the fixed Euclidean metric, recording `log |∧|²`,
/// `Tr(Q L Q)` and `Tr_d(L)` on the integration grid.
pub fn evolve_frame(
    flow: &dyn LinearFlow,
    frame0: &VectorFrame,
    opts: &EvolveOptions,
) -> Result<(VectorFrame, VolumeTrace)> {
    let n = flow.dim();
    evolve_generic(flow, frame0, opts, &|t| {
        Ok(Snapshot { op: DenseOperator::new(flow.generator(t))?, form: InnerProduct::identity(n) })
    })
}

/// Evolves a frame measuring volumes in `V(t)`; the recorded trace is that of
/// `V^{-1} M(t)` with `M(t) = (V L)^{sym} + ½ dV/dt`.
pub fn evolve_frame_metric(
    flow: &dyn LinearFlow,
    metric: &dyn MetricFamily,
    frame0: &VectorFrame,
    opts: &EvolveOptions,
) -> Result<(VectorFrame, VolumeTrace)> {
    if metric.dim() != flow.dim() {
        return Err(Error::DimensionMismatch { expected: flow.dim(), found: metric.dim() });
    }
    evolve_generic(flow, frame0, opts, &|t| {
        let form = metric.form_at(t)?;
        let v = form.matrix();
        let m = energy_rate_form(&v, &flow.generator(t), &metric.form_rate(t, opts.dt));
        let op = DenseOperator::new(riesz_representative(&v, &m)?)?;
        Ok(Snapshot { op, form })
    })
}

/// `max_i |½ (lv[i+1] − lv[i−1]) / (t[i+1] − t[i−1]) − Tr(QLQ)(t_i)|` over interior points.
pub fn liouville_residual(trace: &VolumeTrace) -> Result<f64> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let slope = 0.5 * (trace.log_volume[i + 1] - trace.log_volume[i - 1])
            / (trace.times[i + 1] - trace.times[i - 1]);
        worst = worst.max((slope - trace.trace_qlq[i]).abs());
    }
    Ok(worst)
}

/// Integrates the canonical basis: the solution operator `U(T, 0)`.
pub fn propagator(flow: &dyn LinearFlow, opts: &EvolveOptions) -> Result<DMatrix<f64>> {
    opts.validate()?;
    let n = flow.dim();
    let mut state = DMatrix::identity(n, n);
    for step in 0..opts.steps {
        let t = step as f64 * opts.dt;
        flow.advance(t, opts.dt, &mut state, opts.parallel)?;
        check_finite(&state, t + opts.dt)?;
    }
    Ok(state)
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeBound {
    pub d: usize,
    /// `log ω_d(U(T, 0))`.
    pub log_omega: f64,
    /// `∫_0^T Tr_d(L(s)) ds` (trapezoid on the integration grid).
    pub trace_d_integral: f64,
    /// `trace_d_integral − log_omega`; nonnegative when the bound holds.
    pub slack: f64,
}

impl VolumeBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

fn trapezoid(h: f64, ys: &[f64]) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[ys.len() - 1]))
}

/// Compares `log ω_d(U(T,0))` with `∫ Tr_d(L)`.
pub fn volume_bound_check(flow: &dyn LinearFlow, d: usize, opts: &EvolveOptions) -> Result<VolumeBound> {
    let n = flow.dim();
    let u = propagator(flow, opts)?;
    let id = InnerProduct::identity(n);
    let log_omega = omega_d(&DenseOperator::new(u)?, d, &id)?.ln();
    let traces = (0..=opts.steps)
        .map(|i| trace_d(&DenseOperator::new(flow.generator(i as f64 * opts.dt))?, d, &id))
        .collect::<Result<Vec<f64>>>()?;
    let integral = trapezoid(opts.dt, &traces);
    Ok(VolumeBound { d, log_omega, trace_d_integral: integral, slack: integral - log_omega })
}

/// Splitting `M(t) ≤ −α I + K` of the energy-rate form.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub alpha: f64,
    /// Symmetric nonnegative bound on the non-dissipative part.
    pub k: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct TheoremOptions {
    pub evolve: EvolveOptions,
    /// Every `sample_stride`-th grid time is used to check the splitting and sample `c`.
    pub sample_stride: usize,
    pub n_directions: usize,
    pub seed: u64,
    /// Allowed excess of `(Mφ,φ) + α|φ|² − (Kφ,φ)` relative to `|M| |φ|²`.
    pub tol: f64,
}

impl TheoremOptions {
    pub fn new(evolve: EvolveOptions) -> Self {
        Self { evolve, sample_stride: 1, n_directions: 64, seed: 0, tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremBound {
    pub d: usize,
    pub horizon: f64,
    pub c: f64,
    pub alpha: f64,
    /// `max(0, Σ_{μ_i(K) > α/(2c²)} (μ_i(K) − α/(2c²)))`.
    pub c_k: f64,
    /// `d ln c + (c C_K − α d /(2c)) T`.
    pub log_bound: f64,
    /// Smallest `d` with `c C_K − α d/(2c) < 0`.
    pub min_d: usize,
    /// Time after which `ω_d ≤ ½` is guaranteed, when the exponent is negative.
    pub t0: Option<f64>,
    /// Measured `log ω_d(U(T, 0))`.
    pub measured_log_omega: f64,
    /// Largest sampled value of `λ_max(M + α I − K)` (should be ≤ 0).
    pub worst_excess: f64,
}

/// `C_K` from the spectrum of `K`, absorbing `α d/(2c²)` per direction.
pub fn compact_constant(k_spectrum: &[f64], alpha: f64, c: f64) -> f64 {
    let shift = alpha / (2.0 * c * c);
    k_spectrum.iter().filter(|&&m| m > shift).map(|m| m - shift).sum::<f64>().max(0.0)
}

/// Smallest `d` satisfying `c C_K − α d/(2c) < 0`.
pub fn minimal_dimension(c_k: f64, alpha: f64, c: f64) -> usize {
    (2.0 * c * c * c_k / alpha).floor() as usize + 1
}

/// `d ln c + (c C_K − α d/(2c)) T`.
pub fn theorem_log_bound(d: usize, c: f64, alpha: f64, c_k: f64, horizon: f64) -> f64 {
    let d = d as f64;
    d * c.ln() + (c * c_k - alpha * d / (2.0 * c)) * horizon
}

/// Earliest time from which the bound guarantees `ω_d ≤ ½`.
pub fn contraction_time(d: usize, c: f64, alpha: f64, c_k: f64) -> Option<f64> {
    let rate = alpha * d as f64 / (2.0 * c) - c * c_k;
    (rate > 0.0).then(|| ((d as f64) * c.ln() + 2f64.ln()) / rate)
}

/// Checks the splitting hypothesis along the flow and evaluates the
/// volume-contraction bound, together with the measured `ω_d` of the propagator.
pub fn theorem_main_bound(
    flow: &dyn LinearFlow,
    metric: &dyn MetricFamily,
    splitting: &Splitting,
    d: usize,
    opts: &TheoremOptions,
) -> Result<TheoremBound> {
    let n = flow.dim();
    if metric.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: metric.dim() });
    }
    if splitting.k.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: splitting.k.nrows() });
    }
    if !(splitting.alpha > 0.0) {
        return Err(Error::InvalidArgument("splitting constant alpha must be positive".into()));
    }
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!("d = {d} must lie in 1..={n}")));
    }
    let k = symmetrize(&splitting.k);
    let k_spec = symmetric_eigenvalues_desc(&k);
    if k_spec.last().copied().unwrap_or(0.0) < -1e-12 * k_spec[0].abs().max(1.0) {
        return Err(Error::NotPositiveDefinite {
            context: "compact part K must be nonnegative".into(),
            min_eigenvalue: *k_spec.last().unwrap(),
        });
    }
    let stride = opts.sample_stride.max(1);
    let times: Vec<f64> =
        (0..=opts.evolve.steps).step_by(stride).map(|i| i as f64 * opts.evolve.dt).collect();
    let c = equivalence_constant(metric, &times)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst_excess = f64::NEG_INFINITY;
    for &t in &times {
        let v = metric.form_matrix(t);
        let m = energy_rate_form(&v, &flow.generator(t), &metric.form_rate(t, opts.evolve.dt));
        let excess_op = &m + DMatrix::identity(n, n) * splitting.alpha - &k;
        let scale = m.amax().max(splitting.alpha).max(1.0);
        let eig = nalgebra::SymmetricEigen::new(symmetrize(&excess_op));
        let (imax, &lmax) =
            eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
        let mut excess = lmax;
        let mut direction: Vec<f64> = eig.eigenvectors.column(imax).iter().copied().collect();
        for _ in 0..opts.n_directions {
            let x: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let x = &x / x.norm();
            let q = x.dot(&(&excess_op * &x));
            if q > excess {
                excess = q;
                direction = x.iter().copied().collect();
            }
        }
        worst_excess = worst_excess.max(excess);
        if excess > opts.tol * scale {
            return Err(Error::SplittingViolated { time: t, excess, direction });
        }
    }

    let c_k = compact_constant(&k_spec, splitting.alpha, c);
    let horizon = opts.evolve.steps as f64 * opts.evolve.dt;
    let u = propagator(flow, &opts.evolve)?;
    let sv = singular_values_desc(&u);
    let measured_log_omega: f64 = sv[..d].iter().map(|s| s.ln()).sum();
    Ok(TheoremBound {
        d,
        horizon,
        c,
        alpha: splitting.alpha,
        c_k,
        log_bound: theorem_log_bound(d, c, splitting.alpha, c_k, horizon),
        min_d: minimal_dimension(c_k, splitting.alpha, c),
        t0: contraction_time(d, c, splitting.alpha, c_k),
        measured_log_omega,
        worst_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_flow_grows_volume_linearly() {
        let c = 0.3;
        let flow = ConstantFlow(DMatrix::identity(4, 4) * c);
        let frame = VectorFrame::canonical(4, 2).unwrap();
        let opts = EvolveOptions::new(1e-2, 100);
        let (_, tr) = evolve_frame(&flow, &frame, &opts).unwrap();
        let growth = tr.log_volume.last().unwrap() - tr.log_volume[0];
        assert_abs_diff_eq!(growth, 2.0 * c * 2.0 * 1.0, epsilon = 1e-9);
        assert!(liouville_residual(&tr).unwrap() < 1e-9);
    }

    #[test]
    fn zero_flow_keeps_frame() {
        let flow = ConstantFlow(DMatrix::zeros(3, 3));
        let frame = VectorFrame::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.0, 1.0, 2.0, 0.0])).unwrap();
        let (out, tr) = evolve_frame(&flow, &frame, &EvolveOptions { reorth_every: 1000, ..EvolveOptions::new(0.1, 20) })
            .unwrap();
        assert_eq!(out, frame);
        assert!(tr.log_volume.iter().all(|&v| (v - tr.log_volume[0]).abs() < 1e-14));
        assert_eq!(liouville_residual(&tr).unwrap(), 0.0);
    }

    #[test]
    fn residual_needs_three_samples() {
        let tr = VolumeTrace { times: vec![0.0, 1.0], log_volume: vec![0.0; 2], ..Default::default() };
        assert!(matches!(liouville_residual(&tr), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn uniform_contraction_is_an_equality_case() {
        let gamma = 0.7;
        let flow = ConstantFlow(DMatrix::identity(3, 3) * -gamma);
        let vb = volume_bound_check(&flow, 2, &EvolveOptions::new(1e-3, 1000)).unwrap();
        assert_abs_diff_eq!(vb.log_omega, -gamma * 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vb.trace_d_integral, -gamma * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_metric_grows_volumes_at_twice_its_rate() {
        let a = 0.4;
        let metric = FnMetric::new(2, move |t| DMatrix::identity(2, 2) * (2.0 * a * t).exp())
            .with_rate(move |t| DMatrix::identity(2, 2) * (2.0 * a * (2.0 * a * t).exp()));
        let flow = ConstantFlow(DMatrix::zeros(2, 2));
        let frame = VectorFrame::canonical(2, 2).unwrap();
        let (_, tr) = evolve_frame_metric(&flow, &metric, &frame, &EvolveOptions::new(1e-2, 50)).unwrap();
        for (t, lv) in tr.times.iter().zip(&tr.log_volume) {
            assert_abs_diff_eq!(*lv, 2.0 * a * 2.0 * t, epsilon = 1e-12);
        }
        for q in &tr.trace_qlq {
            assert_abs_diff_eq!(*q, 2.0 * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_contraction_bound() {
        let alpha = 0.5;
        let flow = ConstantFlow(DMatrix::identity(3, 3) * -alpha);
        let bound = theorem_main_bound(
            &flow,
            &IdentityMetric(3),
            &Splitting { alpha, k: DMatrix::zeros(3, 3) },
            2,
            &TheoremOptions::new(EvolveOptions::new(1e-2, 100)),
        )
        .unwrap();
        assert_eq!(bound.c, 1.0);
        assert_eq!(bound.c_k, 0.0);
        assert_eq!(bound.min_d, 1);
        assert_abs_diff_eq!(bound.log_bound, -alpha * 2.0 / 2.0, epsilon = 1e-12);
        assert!(bound.measured_log_omega <= bound.log_bound + 1e-6);
    }

    #[test]
    fn splitting_violation_is_reported_with_direction() {
        let flow = ConstantFlow(DMatrix::from_diagonal(&DVector::from_column_slice(&[0.1, -1.0])));
        let err = theorem_main_bound(
            &flow,
            &IdentityMetric(2),
            &Splitting { alpha: 0.5, k: DMatrix::zeros(2, 2) },
            1,
            &TheoremOptions::new(EvolveOptions::new(1e-2, 10)),
        )
        .unwrap_err();
        match err {
            Error::SplittingViolated { excess, direction, .. } => {
                assert_abs_diff_eq!(excess, 0.6, epsilon = 1e-12);
                assert!(direction[0].abs() > 0.999);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn theorem_formulas() {
        assert_eq!(minimal_dimension(0.0, 1.0, 1.3), 1);
        assert_eq!(compact_constant(&[3.0, 1.0, 0.2], 1.0, 1.0), 2.5 + 0.5);
        assert_eq!(minimal_dimension(3.0, 1.0, 1.0), 7);
        assert!(contraction_time(1, 1.0, 1.0, 1.0).is_none());
        assert_abs_diff_eq!(contraction_time(2, 1.0, 1.0, 0.0).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn csv_has_expected_columns() {
        let flow = ConstantFlow(DMatrix::identity(2, 2) * -1.0);
        let (_, tr) = evolve_frame(&flow, &VectorFrame::canonical(2, 1).unwrap(), &EvolveOptions::new(0.1, 3)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "time,log_volume,trace_QLQ,trace_d,bound_rhs");
        assert_eq!(lines.count(), 4);
    }
}
