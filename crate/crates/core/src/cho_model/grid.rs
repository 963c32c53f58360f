use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

/// Periodic box `[0, 2πℓ)^n` resolved by `N` Fourier modes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spatial_dim: usize,
    pub modes_per_axis: usize,
    /// `ℓ`; the period is `2πℓ`.
    pub length_scale: f64,
    /// Zero-pad nonlinear products. Turning this off is only useful as a regression check.
    #[serde(default = "default_true")]
    pub dealias: bool,
}

impl GridSpec {
    pub fn new(spatial_dim: usize, modes_per_axis: usize, length_scale: f64) -> Self {
        Self { spatial_dim, modes_per_axis, length_scale, dealias: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.spatial_dim) {
            return Err(Error::Config(format!("spatial_dim = {} must be 1, 2 or 3", self.spatial_dim)));
        }
        if self.modes_per_axis < 8 || !self.modes_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "modes_per_axis = {} must be a power of two and at least 8",
                self.modes_per_axis
            )));
        }
        if !(self.length_scale > 0.0) || !self.length_scale.is_finite() {
            return Err(Error::Config(format!("length_scale = {} must be positive", self.length_scale)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.length_scale
    }

    /// Torus volume `(2πℓ)^n`; every `L²` pairing is an integral over the torus.
    pub fn volume(&self) -> f64 {
        self.period().powi(self.spatial_dim as i32)
    }
}

/// Mode bookkeeping for a validated [`GridSpec`].
///
/// A real mean-zero field is stored through one coefficient per pair `±m`:
/// the representative is the member whose first nonzero component is
/// positive. Modes with a component equal to `±N/2` are not retained.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    reps: Vec<[i32; 3]>,
    k2: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        spec.validate()?;
        let half = (spec.modes_per_axis / 2) as i32;
        let n = spec.spatial_dim;
        let mut reps = Vec::new();
        let range = |active: bool| if active { -(half - 1)..=(half - 1) } else { 0..=0 };
        for m0 in range(true) {
            for m1 in range(n >= 2) {
                for m2 in range(n >= 3) {
                    let m = [m0, m1, m2];
                    let first = m.iter().copied().find(|&c| c != 0);
                    if matches!(first, Some(c) if c > 0) {
                        reps.push(m);
                    }
                }
            }
        }
        let l = spec.length_scale;
        let k2 = reps.iter().map(|m| m.iter().map(|&c| (c as f64 / l).powi(2)).sum()).collect();
        Ok(Arc::new(Self { spec, reps, k2 }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn spatial_dim(&self) -> usize {
        self.spec.spatial_dim
    }

    pub fn modes_per_axis(&self) -> usize {
        self.spec.modes_per_axis
    }

    pub fn volume(&self) -> f64 {
        self.spec.volume()
    }

    /// Number of stored (representative) modes.
    pub fn n_modes(&self) -> usize {
        self.reps.len()
    }

    pub fn wavevector(&self, i: usize) -> [i32; 3] {
        self.reps[i]
    }

    pub fn wavevectors(&self) -> &[[i32; 3]] {
        &self.reps
    }

    /// `|k|²` with `k = m / ℓ`.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Finds the stored index of `m` or of `-m`. The flag is true when `-m` matched.
    pub fn find_mode(&self, m: [i32; 3]) -> Option<(usize, bool)> {
        if let Some(i) = self.reps.iter().position(|r| *r == m) {
            return Some((i, false));
        }
        let neg = [-m[0], -m[1], -m[2]];
        self.reps.iter().position(|r| *r == neg).map(|i| (i, true))
    }

    /// Padded grid size per axis so that products of the given polynomial
    /// degree (and their integrals) are alias-free.
    pub fn padded_size(&self, degree: Option<u32>) -> usize {
        if !self.spec.dealias {
            return self.spec.modes_per_axis;
        }
        self.exact_size(degree)
    }

    /// Grid size per axis on which products of the given degree are alias-free,
    /// regardless of the `dealias` flag.
    pub fn exact_size(&self, degree: Option<u32>) -> usize {
        let n = self.spec.modes_per_axis;
        match degree {
            Some(p) if p <= 1 => n,
            Some(p) => (p as usize + 1) * n / 2,
            None => 2 * n,
        }
    }
}

/// Real-to-spectral transforms on a uniform grid of `size^n` points.
pub struct Transform {
    dim: usize,
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pos: Vec<usize>,
    neg: Vec<usize>,
    /// `|k|²` for every point of the full discrete spectrum.
    full_k2: Vec<f64>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("dim", &self.dim).field("size", &self.size).finish()
    }
}

impl Transform {
    pub fn new(grid: &Grid, size: usize) -> Result<Self> {
        let dim = grid.spatial_dim();
        if size < grid.modes_per_axis() {
            return Err(Error::InvalidArgument(format!(
                "transform size {size} cannot hold {} modes per axis",
                grid.modes_per_axis()
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let s = size as i64;
        let flat = |m: [i32; 3]| -> usize {
            (0..dim).fold(0usize, |acc, a| acc * size + (m[a] as i64).rem_euclid(s) as usize)
        };
        let pos = grid.wavevectors().iter().map(|&m| flat(m)).collect();
        let neg = grid.wavevectors().iter().map(|&m| flat([-m[0], -m[1], -m[2]])).collect();
        let total = size.pow(dim as u32);
        let l = grid.spec().length_scale;
        let full_k2 = (0..total)
            .map(|mut idx| {
                let mut k2 = 0.0;
                for _ in 0..dim {
                    let j = (idx % size) as i64;
                    idx /= size;
                    let m = if j > s / 2 { j - s } else { j };
                    k2 += (m as f64 / l).powi(2);
                }
                k2
            })
            .collect();
        Ok(Self { dim, size, fwd, inv, pos, neg, full_k2 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_points(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn full_k2(&self) -> &[f64] {
        &self.full_k2
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let size = self.size;
        let total = buf.len();
        let mut line = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = size.pow((self.dim - 1 - axis) as u32);
            for start in 0..total {
                // first element of each line along `axis`
                if !(start / stride).is_multiple_of(size) {
                    continue;
                }
                for j in 0..size {
                    line[j] = buf[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..size {
                    buf[start + j * stride] = line[j];
                }
            }
        }
    }

    /// Point values of `Σ_m c_m e^{i k·x} + c.c.` on the grid.
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_points()];
        for (i, c) in coeffs.iter().enumerate() {
            buf[self.pos[i]] = *c;
            buf[self.neg[i]] = c.conj();
        }
        self.transform(&mut buf, true);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Normalized discrete spectrum of grid values (all `size^n` modes).
    pub fn full_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        let scale = 1.0 / self.n_points() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
        buf
    }

    /// Coefficients of the stored modes, discarding the mean and everything
    /// outside the retained band.
    pub fn to_modes(&self, values: &[f64]) -> Vec<Complex64> {
        let full = self.full_spectrum(values);
        self.pos.iter().map(|&p| full[p]).collect()
    }

    /// Grid average of the point values (the normalized zero mode).
    pub fn mean(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Coordinates of grid point `idx` inside the fundamental cell.
    pub fn point(&self, mut idx: usize, period: f64) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in (0..self.dim).rev() {
            x[a] = period * (idx % self.size) as f64 / self.size as f64;
            idx /= self.size;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representatives_cover_half_of_the_band() {
        let g = Grid::new(GridSpec::new(1, 16, 1.0)).unwrap();
        assert_eq!(g.n_modes(), 7);
        let g = Grid::new(GridSpec::new(2, 8, 1.0)).unwrap();
        assert_eq!(g.n_modes(), (7 * 7 - 1) / 2);
        let g = Grid::new(GridSpec::new(3, 8, 1.0)).unwrap();
        assert_eq!(g.n_modes(), (7 * 7 * 7 - 1) / 2);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Grid::new(GridSpec::new(4, 16, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 12, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 4, 1.0)).is_err());
        assert!(Grid::new(GridSpec::new(1, 16, 0.0)).is_err());
    }

    #[test]
    fn round_trip_through_physical_space() {
        for (dim, n) in [(1, 16), (2, 8), (3, 8)] {
            let g = Grid::new(GridSpec::new(dim, n, 1.5)).unwrap();
            let t = Transform::new(&g, 2 * n).unwrap();
            let coeffs: Vec<Complex64> =
                (0..g.n_modes()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
            let back = t.to_modes(&t.to_physical(&coeffs));
            for (a, b) in coeffs.iter().zip(&back) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_mode_is_a_cosine() {
        let g = Grid::new(GridSpec::new(1, 8, 1.0)).unwrap();
        let t = Transform::new(&g, 8).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); g.n_modes()];
        c[1] = Complex64::new(0.5, 0.0);
        let v = t.to_physical(&c);
        for (j, x) in v.iter().enumerate() {
            let expected = (2.0 * 2.0 * PI * j as f64 / 8.0).cos();
            assert!((x - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn padding_follows_polynomial_degree() {
        let g = Grid::new(GridSpec::new(1, 32, 1.0)).unwrap();
        assert_eq!(g.padded_size(Some(3)), 64);
        assert_eq!(g.padded_size(Some(1)), 32);
        assert_eq!(g.padded_size(None), 64);
        let g = Grid::new(GridSpec { dealias: false, ..GridSpec::new(1, 32, 1.0) }).unwrap();
        assert_eq!(g.padded_size(Some(3)), 32);
    }
}
