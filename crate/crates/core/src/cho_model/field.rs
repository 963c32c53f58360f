use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, Transform};
use crate::error::{Error, Result};

/// A real, mean-zero field stored by its representative Fourier coefficients:
/// `u(x) = Σ_m (c_m e^{i k·x} + conj(c_m) e^{-i k·x})`, `k = m/ℓ`.
///
/// The mean and the Hermitian partner modes are implicit, so both invariants
/// hold by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); grid.n_modes()] }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::DimensionMismatch { expected: grid.n_modes(), found: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Fourier coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    /// Field with `c_m = amplitude` on one wavevector (or its conjugate on `-m`).
    pub fn single_mode(grid: &Grid, m: [i32; 3], amplitude: Complex64) -> Result<Self> {
        let (i, negated) = grid
            .find_mode(m)
            .ok_or_else(|| Error::InvalidArgument(format!("wavevector {m:?} is not a retained mode")))?;
        let mut f = Self::zeros(grid);
        f.coeffs[i] = if negated { amplitude.conj() } else { amplitude };
        Ok(f)
    }

    /// Samples on the `size^n` grid of `transform`. Point values must have zero
    /// grid average (relative to their sup norm).
    pub fn from_physical(transform: &Transform, values: &[f64]) -> Result<Self> {
        if values.len() != transform.n_points() {
            return Err(Error::DimensionMismatch { expected: transform.n_points(), found: values.len() });
        }
        let mean = transform.mean(values);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if mean.abs() > 1e-12 * scale {
            return Err(Error::NonZeroMean { mean });
        }
        Ok(Self { coeffs: transform.to_modes(values) })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b * s).collect() }
    }
}

fn check_len(grid: &Grid, f: &SpectralField) -> Result<()> {
    if f.len() != grid.n_modes() {
        return Err(Error::DimensionMismatch { expected: grid.n_modes(), found: f.len() });
    }
    Ok(())
}

/// `((-Δ)^s a, b)` with `(·,·)` the integral over the torus.
pub fn sobolev_pairing(grid: &Grid, a: &SpectralField, b: &SpectralField, s: f64) -> Result<f64> {
    check_len(grid, a)?;
    check_len(grid, b)?;
    let total: f64 = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .zip(grid.k2())
        .map(|((x, y), k2)| k2.powf(s) * (x * y.conj()).re)
        .sum();
    Ok(2.0 * grid.volume() * total)
}

/// `‖u‖_{Ḣ^s} = ((-Δ)^s u, u)^{1/2}`.
pub fn sobolev_norm(grid: &Grid, u: &SpectralField, s: f64) -> Result<f64> {
    Ok(sobolev_pairing(grid, u, u, s)?.max(0.0).sqrt())
}

/// `L²` pairing `∫ a b`.
pub fn l2_pairing(grid: &Grid, a: &SpectralField, b: &SpectralField) -> Result<f64> {
    sobolev_pairing(grid, a, b, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::grid::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn single_mode_norm() {
        let g = Grid::new(GridSpec::new(1, 16, 1.0)).unwrap();
        let a = 0.7;
        let u = SpectralField::single_mode(&g, [1, 0, 0], Complex64::new(a, 0.0)).unwrap();
        for s in [-1.0, 0.0, 1.0, 2.5] {
            assert_relative_eq!(sobolev_norm(&g, &u, s).unwrap(), a * (2.0 * g.volume()).sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn l2_norm_matches_quadrature() {
        let g = Grid::new(GridSpec::new(2, 8, 1.3)).unwrap();
        let t = Transform::new(&g, 8).unwrap();
        let u = SpectralField {
            coeffs: (0..g.n_modes()).map(|i| Complex64::new(0.1 * i as f64, -0.05 * i as f64).sqrt()).collect(),
        };
        let values = t.to_physical(&u.coeffs);
        let quad = g.volume() / t.n_points() as f64 * values.iter().map(|v| v * v).sum::<f64>();
        assert_relative_eq!(sobolev_norm(&g, &u, 0.0).unwrap().powi(2), quad, max_relative = 1e-12);
    }

    #[test]
    fn norm_is_homogeneous() {
        let g = Grid::new(GridSpec::new(1, 16, 2.0)).unwrap();
        let u = SpectralField { coeffs: (0..g.n_modes()).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.3)).collect() };
        let n1 = sobolev_norm(&g, &u, 1.0).unwrap();
        assert_relative_eq!(sobolev_norm(&g, &u.scale(-3.0), 1.0).unwrap(), 3.0 * n1, max_relative = 1e-14);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = Grid::new(GridSpec::new(1, 8, 1.0)).unwrap();
        let t = Transform::new(&g, 8).unwrap();
        let err = SpectralField::from_physical(&t, &[1.0; 8]).unwrap_err();
        assert!(matches!(err, Error::NonZeroMean { .. }));
    }
}
