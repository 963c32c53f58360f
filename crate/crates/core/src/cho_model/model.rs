use std::sync::Arc;

use num_complex::Complex64;

use super::field::{sobolev_norm, sobolev_pairing, SpectralField};
use super::grid::{Grid, GridSpec, Transform};
use super::{PhysParams, State};
use crate::error::{Error, Result};

/// Discretized equation: grid, parameters, forcing and the padded transform
/// used for every pointwise product and quadrature.
#[derive(Debug)]
pub struct ChoModel {
    grid: Arc<Grid>,
    params: PhysParams,
    forcing: SpectralField,
    pad: Transform,
    /// Alias-free grid for the energy functional, independent of the `dealias` flag.
    quad: Transform,
}

impl ChoModel {
    pub fn new(spec: GridSpec, params: PhysParams) -> Result<Self> {
        let grid = Grid::new(spec)?;
        params.validate()?;
        let forcing = params.forcing_field(&grid)?;
        let degree = params.nonlinearity.polynomial_degree();
        let pad = Transform::new(&grid, grid.padded_size(degree))?;
        // F has degree p + 1
        let quad = Transform::new(&grid, grid.exact_size(degree.map(|p| p + 1)))?;
        Ok(Self { grid, params, forcing, pad, quad })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    /// Transform on the dealiasing grid.
    pub fn padded(&self) -> &Transform {
        &self.pad
    }

    /// Point values on the dealiasing grid.
    pub fn physical(&self, f: &SpectralField) -> Vec<f64> {
        self.pad.to_physical(&f.coeffs)
    }

    /// Retained-band projection of dealiasing-grid values.
    pub fn project(&self, values: &[f64]) -> SpectralField {
        SpectralField { coeffs: self.pad.to_modes(values) }
    }

    /// `∫ v dx` by the trapezoid rule on the dealiasing grid (spectrally exact
    /// for resolved trigonometric polynomials).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.grid.volume() / self.pad.n_points() as f64 * values.iter().sum::<f64>()
    }

    /// `f'(u)` on the dealiasing grid.
    pub fn derivative_values(&self, u: &SpectralField) -> Vec<f64> {
        let nl = &self.params.nonlinearity;
        self.physical(u).into_iter().map(|x| nl.derivative(x)).collect()
    }

    /// Spectral part of `u_tt` that is not in the linear block: `|k|² (g − f(u))`.
    pub fn forcing_term(&self, u: &SpectralField) -> Vec<Complex64> {
        let k2 = self.grid.k2();
        if self.params.nonlinearity.is_zero() {
            return self.forcing.coeffs.iter().zip(k2).map(|(g, k)| g * *k).collect();
        }
        let nl = &self.params.nonlinearity;
        let fu: Vec<f64> = self.physical(u).into_iter().map(|x| nl.value(x)).collect();
        let fhat = self.pad.to_modes(&fu);
        self.forcing.coeffs.iter().zip(&fhat).zip(k2).map(|((g, f), k)| (g - f) * *k).collect()
    }

    /// Linearization of [`Self::forcing_term`]: `−|k|² P(f'(u) w)`, given `f'(u)` on the padded grid.
    pub fn tangent_term(&self, fprime: &[f64], w: &SpectralField) -> Vec<Complex64> {
        let k2 = self.grid.k2();
        if self.params.nonlinearity.is_zero() {
            return vec![Complex64::new(0.0, 0.0); k2.len()];
        }
        let prod: Vec<f64> = self.physical(w).into_iter().zip(fprime).map(|(a, b)| a * b).collect();
        self.pad.to_modes(&prod).into_iter().zip(k2).map(|(c, k)| -c * *k).collect()
    }

    fn check(&self, s: &State) -> Result<()> {
        let n = self.grid.n_modes();
        for f in [&s.u, &s.ut] {
            if f.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: f.len() });
            }
        }
        Ok(())
    }

    /// `(∂_t u, ∂_t² u)` for the equation.
    pub fn rhs(&self, s: &State) -> Result<State> {
        self.check(s)?;
        let alpha = self.alpha();
        let forcing = self.forcing_term(&s.u);
        let coeffs = (0..self.grid.n_modes())
            .map(|i| {
                let k2 = self.grid.k2()[i];
                -(k2 * k2 + alpha) * s.u.coeffs[i] - s.ut.coeffs[i] + forcing[i]
            })
            .collect::<Vec<_>>();
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::BlowUp { time: f64::NAN, what: "non-finite nonlinear term".into() });
        }
        Ok(State { u: s.ut.clone(), ut: SpectralField { coeffs } })
    }

    /// `(∂_t w, ∂_t² w)` for the equation of variations along `base_u`.
    pub fn tangent_rhs(&self, w: &State, base_u: &SpectralField) -> Result<State> {
        self.check(w)?;
        let alpha = self.alpha();
        let fprime = self.derivative_values(base_u);
        let coupling = self.tangent_term(&fprime, &w.u);
        let coeffs = (0..self.grid.n_modes())
            .map(|i| {
                let k2 = self.grid.k2()[i];
                -(k2 * k2 + alpha) * w.u.coeffs[i] - w.ut.coeffs[i] + coupling[i]
            })
            .collect();
        Ok(State { u: w.ut.clone(), ut: SpectralField { coeffs } })
    }

    /// `‖∂_t u‖²_{Ḣ^{-1}} + ‖u‖²_{Ḣ¹} + α‖u‖²_{Ḣ^{-1}}`.
    pub fn energy_space_norm_sq(&self, s: &State) -> f64 {
        let g = &self.grid;
        sobolev_pairing(g, &s.ut, &s.ut, -1.0).unwrap_or(f64::NAN)
            + sobolev_pairing(g, &s.u, &s.u, 1.0).unwrap_or(f64::NAN)
            + self.alpha() * sobolev_pairing(g, &s.u, &s.u, -1.0).unwrap_or(f64::NAN)
    }

    pub fn energy_space_norm(&self, s: &State) -> f64 {
        self.energy_space_norm_sq(s).max(0.0).sqrt()
    }

    /// `E = ‖ξ‖²_E + 2∫F(u) − 2(g, u)`.
    pub fn energy(&self, s: &State) -> Result<f64> {
        self.check(s)?;
        let nl = &self.params.nonlinearity;
        let potential = if nl.is_zero() {
            0.0
        } else {
            let vals: Vec<f64> = self.quad.to_physical(&s.u.coeffs).into_iter().map(|x| nl.antiderivative(x)).collect();
            self.grid.volume() / self.quad.n_points() as f64 * vals.iter().sum::<f64>()
        };
        let forcing = sobolev_pairing(&self.grid, &self.forcing, &s.u, 0.0)?;
        Ok(self.energy_space_norm_sq(s) + 2.0 * potential - 2.0 * forcing)
    }

    /// `‖∂_t u‖²_{Ḣ^{-1}}`, the energy dissipation rate up to the factor 2.
    pub fn dissipation(&self, s: &State) -> f64 {
        sobolev_norm(&self.grid, &s.ut, -1.0).map(|x| x * x).unwrap_or(f64::NAN)
    }

    /// `d/dt ‖∂_t u‖²_{Ḣ^{-1}} = 2(∂_t u, ∂_t² u)_{Ḣ^{-1}}`.
    pub fn dissipation_rate(&self, s: &State) -> Result<f64> {
        let r = self.rhs(s)?;
        Ok(2.0 * sobolev_pairing(&self.grid, &s.ut, &r.ut, -1.0)?)
    }

    /// `(f'(u) w, v)` by dealiased quadrature.
    pub fn weighted_pairing(&self, weight: &[f64], w: &SpectralField, v: &SpectralField) -> f64 {
        let a = self.physical(w);
        let b = self.physical(v);
        let vals: Vec<f64> = a.iter().zip(&b).zip(weight).map(|((x, y), c)| x * y * c).collect();
        self.integrate(&vals)
    }

    /// `max |u|` and `max |∇u|` on the dealiasing grid.
    pub fn c1_proxy(&self, u: &SpectralField) -> (f64, f64) {
        let sup = self.physical(u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut grad_sq = vec![0.0; self.pad.n_points()];
        let l = self.grid.spec().length_scale;
        for axis in 0..self.grid.spatial_dim() {
            let coeffs: Vec<Complex64> = u
                .coeffs
                .iter()
                .zip(self.grid.wavevectors())
                .map(|(c, m)| c * Complex64::new(0.0, m[axis] as f64 / l))
                .collect();
            for (g, v) in grad_sq.iter_mut().zip(self.pad.to_physical(&coeffs)) {
                *g += v * v;
            }
        }
        let grad = grad_sq.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt();
        (sup, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::Nonlinearity;
    use approx::assert_abs_diff_eq;

    fn model(nl: Nonlinearity) -> ChoModel {
        ChoModel::new(GridSpec::new(1, 16, 2.0), PhysParams::new(1.5, nl)).unwrap()
    }

    #[test]
    fn zero_state_is_an_equilibrium() {
        let m = model(Nonlinearity::Cubic);
        let z = State::zeros(m.grid());
        let r = m.rhs(&z).unwrap();
        assert_eq!(r, z);
        assert_eq!(m.energy(&z).unwrap(), 0.0);
        assert_eq!(m.energy_space_norm(&z), 0.0);
    }

    #[test]
    fn linear_single_mode_rate_matches_block() {
        let m = model(Nonlinearity::Zero);
        let g = m.grid().clone();
        let u = SpectralField::single_mode(&g, [3, 0, 0], Complex64::new(0.2, -0.1)).unwrap();
        let ut = SpectralField::single_mode(&g, [3, 0, 0], Complex64::new(-0.4, 0.3)).unwrap();
        let s = State { u: u.clone(), ut: ut.clone() };
        let r = m.rhs(&s).unwrap();
        let (i, _) = g.find_mode([3, 0, 0]).unwrap();
        let k2 = g.k2()[i];
        let expected = -(k2 * k2 + 1.5) * u.coeffs[i] - ut.coeffs[i];
        assert!((r.ut.coeffs[i] - expected).norm() < 1e-15);
        assert_eq!(r.u, ut);
    }

    #[test]
    fn energy_of_single_linear_mode() {
        let m = model(Nonlinearity::Zero);
        let g = m.grid().clone();
        let (cu, cv) = (Complex64::new(0.3, 0.4), Complex64::new(-0.2, 0.1));
        let s = State {
            u: SpectralField::single_mode(&g, [2, 0, 0], cu).unwrap(),
            ut: SpectralField::single_mode(&g, [2, 0, 0], cv).unwrap(),
        };
        let k2: f64 = (2.0f64 / 2.0).powi(2);
        let vol = g.volume();
        let expected = 2.0 * vol * (cv.norm_sqr() / k2 + k2 * cu.norm_sqr() + 1.5 * cu.norm_sqr() / k2);
        assert_abs_diff_eq!(m.energy(&s).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(m.energy_space_norm_sq(&s), expected, epsilon = 1e-12);
    }

    #[test]
    fn linear_tangent_is_rhs_without_forcing() {
        let lambda = 0.7;
        let p = PhysParams::new(1.0, Nonlinearity::Linear { lambda }).with_forcing(&[1], 0.5, 0.0);
        let m = ChoModel::new(GridSpec::new(1, 16, 1.0), p).unwrap();
        let g = m.grid().clone();
        let s = State {
            u: SpectralField { coeffs: (0..g.n_modes()).map(|i| Complex64::new(0.1 / (1.0 + i as f64), 0.05)).collect() },
            ut: SpectralField { coeffs: (0..g.n_modes()).map(|i| Complex64::new(-0.02 * i as f64, 0.01)).collect() },
        };
        let full = m.rhs(&s).unwrap();
        let tan = m.tangent_rhs(&s, &s.u).unwrap();
        let forcing: Vec<Complex64> = m.forcing().coeffs.iter().zip(g.k2()).map(|(c, k)| c * *k).collect();
        for i in 0..g.n_modes() {
            assert!((full.ut.coeffs[i] - forcing[i] - tan.ut.coeffs[i]).norm() < 1e-13);
        }
    }
}
