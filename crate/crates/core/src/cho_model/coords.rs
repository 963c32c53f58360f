use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::SpectralField;
use super::grid::Grid;
use super::model::ChoModel;
use super::stepper::Stepper;
use super::State;
use crate::error::{Error, Result};
use crate::liouville::LinearFlow;

/// Real coordinates in which the energy-space norm is Euclidean.
///
/// For stored mode `i` with `c = û_i`, `c_t = ∂_t û_i`:
/// `a = s_a (Re c, Im c)`, `b = s_b (Re c_t, Im c_t)` with
/// `s_a² = 2 vol (|k|² + α/|k|²)` and `s_b² = 2 vol / |k|²`.
/// The vector is laid out as `[a_0, a_1, …, b_0, b_1, …]`, two reals per mode.
#[derive(Clone, Debug)]
pub struct EnergyCoordinates {
    grid: Arc<Grid>,
    sa: Vec<f64>,
    sb: Vec<f64>,
    omega: Vec<f64>,
}

impl EnergyCoordinates {
    pub fn new(grid: Arc<Grid>, alpha: f64) -> Self {
        let vol = grid.volume();
        let sa = grid.k2().iter().map(|k2| (2.0 * vol * (k2 + alpha / k2)).sqrt()).collect();
        let sb = grid.k2().iter().map(|k2| (2.0 * vol / k2).sqrt()).collect();
        let omega = grid.k2().iter().map(|k2| (k2 * k2 + alpha).sqrt()).collect();
        Self { grid, sa, sb, omega }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        4 * self.grid.n_modes()
    }

    /// Size of the `u` block (and of the `∂_t u` block).
    pub fn half_dim(&self) -> usize {
        2 * self.grid.n_modes()
    }

    /// `sqrt(|k|⁴ + α)` per stored mode.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn u_scale(&self) -> &[f64] {
        &self.sa
    }

    pub fn ut_scale(&self) -> &[f64] {
        &self.sb
    }

    pub fn to_vector(&self, s: &State) -> DVector<f64> {
        let r = self.grid.n_modes();
        let mut x = DVector::zeros(4 * r);
        for i in 0..r {
            x[2 * i] = self.sa[i] * s.u.coeffs[i].re;
            x[2 * i + 1] = self.sa[i] * s.u.coeffs[i].im;
            x[2 * r + 2 * i] = self.sb[i] * s.ut.coeffs[i].re;
            x[2 * r + 2 * i + 1] = self.sb[i] * s.ut.coeffs[i].im;
        }
        x
    }

    pub fn to_state(&self, x: &DVector<f64>) -> Result<State> {
        let r = self.grid.n_modes();
        if x.len() != 4 * r {
            return Err(Error::DimensionMismatch { expected: 4 * r, found: x.len() });
        }
        let u = (0..r).map(|i| Complex64::new(x[2 * i], x[2 * i + 1]) / self.sa[i]).collect();
        let ut = (0..r).map(|i| Complex64::new(x[2 * r + 2 * i], x[2 * r + 2 * i + 1]) / self.sb[i]).collect();
        Ok(State { u: SpectralField { coeffs: u }, ut: SpectralField { coeffs: ut } })
    }

    /// Field represented by unit coordinate `j` of the `u` block (or of the
    /// `∂_t u` block when `rate` is set).
    pub fn basis_field(&self, j: usize, rate: bool) -> SpectralField {
        let mut f = SpectralField::zeros(&self.grid);
        let i = j / 2;
        let s = if rate { self.sb[i] } else { self.sa[i] };
        f.coeffs[i] = if j.is_multiple_of(2) { Complex64::new(1.0 / s, 0.0) } else { Complex64::new(0.0, 1.0 / s) };
        f
    }

    /// Point values of all basis fields of one block on the model's padded grid (one column each).
    pub fn basis_values(&self, model: &ChoModel, rate: bool) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = (0..self.half_dim())
            .map(|j| DVector::from_vec(model.physical(&self.basis_field(j, rate))))
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Generator of the linear part in these coordinates: per real component
    /// `[[0, ω], [−ω, −1]]`.
    pub fn linear_generator(&self) -> DMatrix<f64> {
        let r = self.grid.n_modes();
        let h = 2 * r;
        let mut l = DMatrix::zeros(4 * r, 4 * r);
        for i in 0..r {
            for c in 0..2 {
                let a = 2 * i + c;
                l[(a, h + a)] = self.omega[i];
                l[(h + a, a)] = -self.omega[i];
                l[(h + a, h + a)] = -1.0;
            }
        }
        l
    }

    /// Generator of the equation of variations along `base_u`.
    pub fn generator(&self, model: &ChoModel, base_u: &SpectralField) -> DMatrix<f64> {
        let mut l = self.linear_generator();
        if model.params().nonlinearity.is_zero() {
            return l;
        }
        let h = self.half_dim();
        let fprime = model.derivative_values(base_u);
        for j in 0..h {
            let coupling = model.tangent_term(&fprime, &self.basis_field(j, false));
            for (i, c) in coupling.iter().enumerate() {
                l[(h + 2 * i, j)] += self.sb[i] * c.re;
                l[(h + 2 * i + 1, j)] += self.sb[i] * c.im;
            }
        }
        l
    }
}

/// Equation of variations along a stored base trajectory, as a [`LinearFlow`]
/// in energy coordinates. Steps use the discrete tangent of the stepper, so
/// `advance` is only valid on the trajectory's time grid.
pub struct TangentFlow {
    stepper: Stepper,
    coords: EnergyCoordinates,
    base: Vec<State>,
}

impl TangentFlow {
    /// `base[i]` must be the state at time `i * dt` produced by `stepper`.
    pub fn new(stepper: Stepper, base: Vec<State>) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let model = stepper.model().clone();
        let coords = EnergyCoordinates::new(model.grid().clone(), model.alpha());
        Ok(Self { stepper, coords, base })
    }

    /// Integrates `steps` steps from `start` and keeps every state.
    pub fn along(stepper: Stepper, start: &State, steps: usize) -> Result<Self> {
        let mut base = Vec::with_capacity(steps + 1);
        base.push(start.clone());
        for i in 0..steps {
            let next = stepper.step(&base[i]).map_err(|e| match e {
                Error::BlowUp { what, .. } => Error::BlowUp { time: (i + 1) as f64 * stepper.dt(), what },
                other => other,
            })?;
            base.push(next);
        }
        Self::new(stepper, base)
    }

    pub fn coords(&self) -> &EnergyCoordinates {
        &self.coords
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn base(&self) -> &[State] {
        &self.base
    }

    fn index(&self, t: f64) -> usize {
        ((t / self.stepper.dt()).round().max(0.0) as usize).min(self.base.len() - 1)
    }
}

impl LinearFlow for TangentFlow {
    fn dim(&self) -> usize {
        self.coords.dim()
    }

    fn generator(&self, t: f64) -> DMatrix<f64> {
        self.coords.generator(self.stepper.model(), &self.base[self.index(t)].u)
    }

    fn advance(&self, t: f64, dt: f64, state: &mut DMatrix<f64>, parallel: bool) -> Result<()> {
        if (dt - self.stepper.dt()).abs() > 1e-12 * dt {
            return Err(Error::InvalidArgument(format!(
                "tangent flow steps with dt = {}, asked for {dt}",
                self.stepper.dt()
            )));
        }
        let i = self.index(t);
        if i + 1 >= self.base.len() {
            return Err(Error::InvalidArgument(format!("t = {t} is past the stored base trajectory")));
        }
        let (fp0, fp1) = self.stepper.stage_derivatives(&self.base[i]);
        let step = |j: usize| -> Result<DVector<f64>> {
            let w = self.coords.to_state(&state.column(j).into_owned())?;
            Ok(self.coords.to_vector(&self.stepper.tangent_step(&w, &fp0, &fp1)))
        };
        let cols: Vec<DVector<f64>> = if parallel {
            (0..state.ncols()).into_par_iter().map(step).collect::<Result<_>>()?
        } else {
            (0..state.ncols()).map(step).collect::<Result<_>>()?
        };
        for (j, c) in cols.into_iter().enumerate() {
            state.set_column(j, &c);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::{GridSpec, Nonlinearity, PhysParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn coordinates_make_the_energy_norm_euclidean() {
        let model = ChoModel::new(GridSpec::new(1, 16, 1.3), PhysParams::new(0.7, Nonlinearity::Cubic)).unwrap();
        let c = EnergyCoordinates::new(model.grid().clone(), 0.7);
        let r = model.grid().n_modes();
        let s = State {
            u: SpectralField { coeffs: (0..r).map(|i| Complex64::new(0.1 * i as f64, -0.2)).collect() },
            ut: SpectralField { coeffs: (0..r).map(|i| Complex64::new(0.3, 0.05 * i as f64)).collect() },
        };
        let x = c.to_vector(&s);
        assert_abs_diff_eq!(x.norm_squared(), model.energy_space_norm_sq(&s), epsilon = 1e-10);
        let back = c.to_state(&x).unwrap();
        for (a, b) in back.u.coeffs.iter().zip(&s.u.coeffs) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn generator_matches_tangent_rhs() {
        let model = ChoModel::new(GridSpec::new(1, 16, 1.0), PhysParams::new(1.0, Nonlinearity::Cubic)).unwrap();
        let c = EnergyCoordinates::new(model.grid().clone(), 1.0);
        let r = model.grid().n_modes();
        let base = SpectralField { coeffs: (0..r).map(|i| Complex64::new(0.3 / (1.0 + i as f64), 0.1)).collect() };
        let w = State {
            u: SpectralField { coeffs: (0..r).map(|i| Complex64::new((i as f64).cos(), 0.2)).collect() },
            ut: SpectralField { coeffs: (0..r).map(|i| Complex64::new(0.1, (i as f64).sin())).collect() },
        };
        let lhs = c.generator(&model, &base) * c.to_vector(&w);
        let rhs = c.to_vector(&model.tangent_rhs(&w, &base).unwrap());
        assert!((lhs - &rhs).amax() < 1e-10 * rhs.amax());
    }
}
