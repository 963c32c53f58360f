use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix};

use super::cutoff::cutoff_field;
use super::ResolvedMetric;
use crate::cho_model::{sobolev_pairing, ChoModel, EnergyCoordinates, SpectralField, State};
use crate::error::{Error, Result};
use crate::multilinear::{symmetric_eigenvalues_desc, symmetrize};

/// Matrices of the modified metric and its energy-rate form at one base state,
/// in energy coordinates.
#[derive(Clone, Debug)]
pub struct BaseForms {
    /// Gram matrix of the metric.
    pub v: DMatrix<f64>,
    /// `d/dt` of the metric along the base trajectory.
    pub v_rate: DMatrix<f64>,
    /// Energy-rate form `sym(V L) + ½ V̇`, assembled term by term.
    pub m: DMatrix<f64>,
}

/// Precomputed pieces of the modified metric
///
/// ```text
/// ‖ξ_w‖²_{E(t)} = ‖ξ_w‖²_E + 2δ(∂_t w, w)_{-1} + δ‖w‖²_{-1} + (f'(u) w, w)
///                 + L ‖(1 − Δ)^{-1/2}(ψ w)‖²
/// ```
///
/// for a fixed model, together with the compact form `‖ψ w‖²`.
#[derive(Clone, Debug)]
pub struct MetricForms {
    model: Arc<ChoModel>,
    coords: EnergyCoordinates,
    params: ResolvedMetric,
    psi: Vec<f64>,
    /// Point values of the `u`-block basis on the padded grid.
    wa: DMatrix<f64>,
    /// `‖(1 − Δ)^{-1/2}(ψ w)‖²` on the `u` block, without the weight `L`.
    corrector: DMatrix<f64>,
    /// `((1 − Δ)^{-1} ψ w_a, ψ w_b)` between the two blocks.
    cross: DMatrix<f64>,
    /// `‖ψ w‖²` on the full space.
    compact: DMatrix<f64>,
    /// Parts of V and M that do not depend on the base state.
    v_static: DMatrix<f64>,
    m_static: DMatrix<f64>,
    quad: f64,
}

impl MetricForms {
    pub fn new(model: Arc<ChoModel>, params: ResolvedMetric) -> Result<Self> {
        params.validate()?;
        let grid = model.grid().clone();
        let coords = EnergyCoordinates::new(grid.clone(), model.alpha());
        let pad = model.padded();
        let psi = cutoff_field(grid.spec(), pad, params.radius, params.transition_width)?;
        let wa = coords.basis_values(&model, false);
        let wb = coords.basis_values(&model, true);
        let quad = grid.volume() / pad.n_points() as f64;
        let smooth = |w: &DMatrix<f64>| -> DMatrix<f64> {
            // real and imaginary parts of the weighted spectrum of ψ w, one column per basis field
            let weights: Vec<f64> = pad.full_k2().iter().map(|k2| (grid.volume() / (1.0 + k2)).sqrt()).collect();
            let p = pad.n_points();
            let mut out = DMatrix::zeros(2 * p, w.ncols());
            for j in 0..w.ncols() {
                let vals: Vec<f64> = w.column(j).iter().zip(&psi).map(|(a, b)| a * b).collect();
                for (q, z) in pad.full_spectrum(&vals).into_iter().enumerate() {
                    out[(2 * q, j)] = weights[q] * z.re;
                    out[(2 * q + 1, j)] = weights[q] * z.im;
                }
            }
            out
        };
        let ha = smooth(&wa);
        let hb = smooth(&wb);
        let corrector = symmetrize(&(ha.transpose() * &ha));
        let cross = ha.transpose() * &hb;

        let h = coords.half_dim();
        let n = coords.dim();
        let psi2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|p| p * p * quad)));
        let mut compact = DMatrix::zeros(n, n);
        compact.view_mut((0, 0), (h, h)).copy_from(&symmetrize(&(wa.transpose() * &psi2 * &wa)));

        let (delta, lw) = (params.delta, params.lweight);
        let mut v_static = DMatrix::identity(n, n);
        let mut m_static = DMatrix::zeros(n, n);
        for j in 0..h {
            let omega = coords.omega()[j / 2];
            v_static[(j, j)] += delta / (omega * omega);
            v_static[(j, h + j)] += delta / omega;
            v_static[(h + j, j)] += delta / omega;
            m_static[(j, j)] = -delta;
            m_static[(h + j, h + j)] = -(1.0 - delta);
        }
        if lw != 0.0 {
            let mut a = v_static.view_mut((0, 0), (h, h));
            a += &corrector * lw;
            m_static.view_mut((0, h), (h, h)).copy_from(&(&cross * (0.5 * lw)));
            m_static.view_mut((h, 0), (h, h)).copy_from(&(cross.transpose() * (0.5 * lw)));
        }
        Ok(Self { model, coords, params, psi, wa, corrector, cross, compact, v_static, m_static, quad })
    }

    pub fn model(&self) -> &Arc<ChoModel> {
        &self.model
    }

    pub fn coords(&self) -> &EnergyCoordinates {
        &self.coords
    }

    pub fn params(&self) -> &ResolvedMetric {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    /// Cutoff values on the padded grid.
    pub fn cutoff(&self) -> &[f64] {
        &self.psi
    }

    /// The same forms with a different weight on the corrector term.
    pub fn with_lweight(&self, lweight: f64) -> Result<Self> {
        let mut out = self.clone();
        let h = self.coords.half_dim();
        let dl = lweight - self.params.lweight;
        out.params.lweight = lweight;
        out.params.validate()?;
        let mut a = out.v_static.view_mut((0, 0), (h, h));
        a += &self.corrector * dl;
        out.m_static.view_mut((0, h), (h, h)).copy_from(&(&self.cross * (0.5 * lweight)));
        out.m_static.view_mut((h, 0), (h, h)).copy_from(&(self.cross.transpose() * (0.5 * lweight)));
        Ok(out)
    }

    /// `‖ψ w‖²` as a matrix on energy coordinates (nonzero only on the `u` block).
    pub fn compact_form(&self) -> &DMatrix<f64> {
        &self.compact
    }

    fn weighted_gram(&self, weight: &[f64]) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.wa.nrows(), self.wa.ncols(), |i, j| self.wa[(i, j)] * weight[i] * self.quad);
        symmetrize(&(self.wa.transpose() * scaled))
    }

    /// `f''(u) ∂_t u` on the padded grid.
    fn rate_weight(&self, base: &State) -> Vec<f64> {
        let nl = &self.model.params().nonlinearity;
        let u = self.model.physical(&base.u);
        let ut = self.model.physical(&base.ut);
        u.iter().zip(&ut).map(|(a, b)| nl.second_derivative(*a) * b).collect()
    }

    /// The metric Gram matrix at `base`.
    pub fn metric_matrix(&self, base: &State) -> DMatrix<f64> {
        let mut v = self.v_static.clone();
        if !self.model.params().nonlinearity.is_zero() {
            let h = self.coords.half_dim();
            let mut a = v.view_mut((0, 0), (h, h));
            a += self.weighted_gram(&self.model.derivative_values(&base.u));
        }
        v
    }

    /// `V̇` along the trajectory through `base`: only `(f''(u) ∂_t u w, w)` varies.
    pub fn metric_rate(&self, base: &State) -> DMatrix<f64> {
        let n = self.dim();
        let mut r = DMatrix::zeros(n, n);
        if !self.model.params().nonlinearity.is_zero() {
            let h = self.coords.half_dim();
            r.view_mut((0, 0), (h, h)).copy_from(&self.weighted_gram(&self.rate_weight(base)));
        }
        r
    }

    pub fn at(&self, base: &State) -> BaseForms {
        let h = self.coords.half_dim();
        let mut v = self.v_static.clone();
        let mut m = self.m_static.clone();
        let n = self.dim();
        let mut v_rate = DMatrix::zeros(n, n);
        if !self.model.params().nonlinearity.is_zero() {
            let p = self.weighted_gram(&self.model.derivative_values(&base.u));
            let q = self.weighted_gram(&self.rate_weight(base));
            let mut va = v.view_mut((0, 0), (h, h));
            va += &p;
            let mut ma = m.view_mut((0, 0), (h, h));
            ma += &q * 0.5 - &p * self.params.delta;
            v_rate.view_mut((0, 0), (h, h)).copy_from(&q);
        }
        BaseForms { v, v_rate, m }
    }

    /// Generator of the equation of variations along `base`.
    pub fn generator(&self, base: &State) -> DMatrix<f64> {
        self.coords.generator(&self.model, &base.u)
    }

    fn smoothed_pairing(&self, w: &SpectralField, v: &SpectralField) -> f64 {
        let pad = self.model.padded();
        let vol = self.model.grid().volume();
        let spec = |f: &SpectralField| {
            let vals: Vec<f64> = self.model.physical(f).iter().zip(&self.psi).map(|(a, b)| a * b).collect();
            pad.full_spectrum(&vals)
        };
        let (a, b) = (spec(w), spec(v));
        vol * a.iter().zip(&b).zip(pad.full_k2()).map(|((x, y), k2)| (x * y.conj()).re / (1.0 + k2)).sum::<f64>()
    }

    /// `‖ξ_w‖²_{E(t)}` at `base`, evaluated term by term on fields.
    /// A negative value means the metric is not positive at this state.
    pub fn metric_norm_sq(&self, base: &State, xi: &State) -> Result<f64> {
        let g = self.model.grid();
        let (delta, lw) = (self.params.delta, self.params.lweight);
        let fprime = self.model.derivative_values(&base.u);
        let value = self.model.energy_space_norm_sq(xi)
            + 2.0 * delta * sobolev_pairing(g, &xi.ut, &xi.u, -1.0)?
            + delta * sobolev_pairing(g, &xi.u, &xi.u, -1.0)?
            + self.model.weighted_pairing(&fprime, &xi.u, &xi.u)
            + lw * self.smoothed_pairing(&xi.u, &xi.u);
        if value < 0.0 {
            return Err(Error::NotPositiveDefinite { context: "modified metric".into(), min_eigenvalue: value });
        }
        Ok(value)
    }

    pub fn metric_norm(&self, base: &State, xi: &State) -> Result<f64> {
        self.metric_norm_sq(base, xi).map(f64::sqrt)
    }

    /// The energy-rate quadratic form at `base`, evaluated term by term:
    ///
    /// ```text
    /// −(1 − δ)‖∂_t w‖²_{-1} − δ‖w‖²_1 − αδ‖w‖²_{-1} − δ(f'(u) w, w)
    ///   + ½(f''(u) ∂_t u, w²) + L((1 − Δ)^{-1} ψ w, ψ ∂_t w)
    /// ```
    pub fn rate_form(&self, base: &State, xi: &State) -> Result<f64> {
        let g = self.model.grid();
        let (delta, lw) = (self.params.delta, self.params.lweight);
        let alpha = self.model.alpha();
        let fprime = self.model.derivative_values(&base.u);
        let rate = self.rate_weight(base);
        Ok(-(1.0 - delta) * sobolev_pairing(g, &xi.ut, &xi.ut, -1.0)?
            - delta * sobolev_pairing(g, &xi.u, &xi.u, 1.0)?
            - alpha * delta * sobolev_pairing(g, &xi.u, &xi.u, -1.0)?
            - delta * self.model.weighted_pairing(&fprime, &xi.u, &xi.u)
            + 0.5 * self.model.weighted_pairing(&rate, &xi.u, &xi.u)
            + lw * self.smoothed_pairing(&xi.u, &xi.ut))
    }

    /// `‖ψ w‖²`, evaluated on fields.
    pub fn compact_norm_sq(&self, xi: &State) -> f64 {
        let w2: Vec<f64> = self.model.physical(&xi.u).iter().zip(&self.psi).map(|(w, p)| (w * p).powi(2)).collect();
        self.model.integrate(&w2)
    }

    /// `(λ_min, λ_max)` of the metric relative to the energy norm at `base`.
    pub fn extreme_eigenvalues(&self, base: &State) -> (f64, f64) {
        let ev = symmetric_eigenvalues_desc(&self.metric_matrix(base));
        (*ev.last().expect("nonempty"), ev[0])
    }
}

/// Eigenvalues of the pencil `(M, V)` in nonincreasing order; `V` must be positive definite.
pub fn generalized_eigenvalues_desc(m: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(symmetrize(v)).ok_or_else(|| Error::NotPositiveDefinite {
        context: "metric Gram matrix".into(),
        min_eigenvalue: symmetric_eigenvalues_desc(v).last().copied().unwrap_or(f64::NAN),
    })?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
    Ok(symmetric_eigenvalues_desc(&(&linv * symmetrize(m) * linv.transpose())))
}

/// `max(λ_max, 1/λ_min)` of a positive-definite Gram matrix relative to the identity.
pub fn equivalence_of(v: &DMatrix<f64>) -> Result<f64> {
    let ev = symmetric_eigenvalues_desc(v);
    let lo = *ev.last().expect("nonempty");
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { context: "modified metric".into(), min_eigenvalue: lo });
    }
    Ok(ev[0].max(1.0 / lo))
}
