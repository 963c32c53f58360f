//! Fourier-spectral model of the damped hyperbolic Cahn-Hilliard-Oono equation
//!
//! ```text
//! u_tt + u_t + Δ(Δu − f(u) + g) + αu = 0
//! ```
//!
//! on the torus `[0, 2πℓ)^n`, restricted to mean-zero fields.

mod analysis;
mod coords;
mod field;
mod grid;
pub mod io;
mod model;
mod nonlinearity;
mod stepper;

use serde::{Deserialize, Serialize};

pub use analysis::{
    attractor_sample, quasidifferential_test, random_state, simulate, tangent_energy_residual, AttractorSample, QuasidiffReport,
    SampleOptions, Trajectory,
};
pub use coords::{EnergyCoordinates, TangentFlow};
pub use field::{l2_pairing, sobolev_norm, sobolev_pairing, SpectralField};
pub use grid::{Grid, GridSpec, Transform};
pub use model::ChoModel;
pub use nonlinearity::{Nonlinearity, NonlinearityReport};
pub use stepper::{Block, Stepper};

use crate::error::{Error, Result};

/// One Fourier component of the forcing `g`: `c_m = re + i im` on wavevector `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingMode {
    pub wavevector: Vec<i32>,
    pub amplitude: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub alpha: f64,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub forcing: Vec<ForcingMode>,
}

impl PhysParams {
    pub fn new(alpha: f64, nonlinearity: Nonlinearity) -> Self {
        Self { alpha, nonlinearity, forcing: Vec::new() }
    }

    pub fn with_forcing(mut self, wavevector: &[i32], re: f64, im: f64) -> Self {
        self.forcing.push(ForcingMode { wavevector: wavevector.to_vec(), amplitude: [re, im] });
        self
    }

    pub fn validate(&self) -> Result<NonlinearityReport> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha = {} must be positive", self.alpha)));
        }
        let report = self.nonlinearity.validate();
        if !report.passes {
            let (what, at) = report.violation.clone().unwrap_or_default();
            return Err(Error::Config(format!("nonlinearity violates `{what}` at u = {at:?}")));
        }
        Ok(report)
    }

    pub fn forcing_field(&self, grid: &Grid) -> Result<SpectralField> {
        let mut g = SpectralField::zeros(grid);
        for mode in &self.forcing {
            if mode.wavevector.len() != grid.spatial_dim() {
                return Err(Error::Config(format!(
                    "forcing wavevector {:?} does not have {} components",
                    mode.wavevector,
                    grid.spatial_dim()
                )));
            }
            let mut m = [0i32; 3];
            m[..mode.wavevector.len()].copy_from_slice(&mode.wavevector);
            let (i, negated) = grid
                .find_mode(m)
                .ok_or_else(|| Error::Config(format!("forcing wavevector {m:?} is not a retained nonzero mode")))?;
            let c = num_complex::Complex64::new(mode.amplitude[0], mode.amplitude[1]);
            g.coeffs[i] += if negated { c.conj() } else { c };
        }
        Ok(g)
    }
}

/// `ξ = (u, ∂_t u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self { u: SpectralField::zeros(grid), ut: SpectralField::zeros(grid) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.ut.is_finite()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { u: self.u.scale(s), ut: self.ut.scale(s) }
    }

    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self { u: self.u.add_scaled(s, &other.u), ut: self.ut.add_scaled(s, &other.ut) }
    }
}
