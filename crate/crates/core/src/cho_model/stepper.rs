use std::sync::Arc;

use num_complex::Complex64;

use super::field::SpectralField;
use super::model::ChoModel;
use super::State;
use crate::error::{Error, Result};

/// Real 2×2 matrix acting on `(û, ∂_t û)` of one mode.
pub type Block = [[f64; 2]; 2];

const IDENTITY: Block = [[1.0, 0.0], [0.0, 1.0]];

fn mul(a: &Block, b: &Block) -> Block {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn lin(a: &Block, sa: f64, b: &Block, sb: f64) -> Block {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = sa * a[i][j] + sb * b[i][j];
        }
    }
    c
}

fn inverse(a: &Block) -> Block {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn norm_inf(a: &Block) -> f64 {
    (a[0][0].abs() + a[0][1].abs()).max(a[1][0].abs() + a[1][1].abs())
}

/// `e^{hA}` for `A = [[0, 1], [−ω², −1]]`.
///
/// With `B = A + I/2`, `B² = (1/4 − ω²) I`, so `e^{hB} = C I + S B` where
/// `C, S` are the even and odd parts of `e^{h√s}` for `s = 1/4 − ω²`.
pub fn block_exp(omega2: f64, h: f64) -> Block {
    let s = 0.25 - omega2;
    let (c, sh) = if s.abs() * h * h < 1e-10 {
        let x = s * h * h;
        (1.0 + x / 2.0 + x * x / 24.0, h * (1.0 + x / 6.0 + x * x / 120.0))
    } else if s > 0.0 {
        let q = s.sqrt();
        ((h * q).cosh(), (h * q).sinh() / q)
    } else {
        let q = (-s).sqrt();
        ((h * q).cos(), (h * q).sin() / q)
    };
    let damp = (-0.5 * h).exp();
    let b: Block = [[0.5, 1.0], [-omega2, -0.5]];
    let e = lin(&IDENTITY, c, &b, sh);
    [[damp * e[0][0], damp * e[0][1]], [damp * e[1][0], damp * e[1][1]]]
}

/// `(φ_1(Z), φ_2(Z))` with `φ_1(Z) = Z^{-1}(e^Z − I)`, `φ_2(Z) = Z^{-1}(φ_1(Z) − I)`.
fn phi_functions(z: &Block, ez: &Block) -> (Block, Block) {
    if norm_inf(z) < 1.0 {
        // Taylor series: φ_j(Z) = Σ_m Z^m / (m + j)!
        let mut p1 = IDENTITY;
        let mut p2 = lin(&IDENTITY, 0.5, &IDENTITY, 0.0);
        let mut power = IDENTITY;
        let mut f1 = 1.0; // 1/(m+1)!
        let mut f2 = 0.5; // 1/(m+2)!
        for m in 1..40 {
            power = mul(&power, z);
            f1 /= (m + 1) as f64;
            f2 /= (m + 2) as f64;
            p1 = lin(&p1, 1.0, &power, f1);
            p2 = lin(&p2, 1.0, &power, f2);
            if norm_inf(&power) * f1 < 1e-20 {
                break;
            }
        }
        (p1, p2)
    } else {
        let zi = inverse(z);
        let p1 = mul(&zi, &lin(ez, 1.0, &IDENTITY, -1.0));
        let p2 = mul(&zi, &lin(&p1, 1.0, &IDENTITY, -1.0));
        (p1, p2)
    }
}

#[derive(Clone, Debug)]
struct ModeBlocks {
    e_half: Block,
    phi1_half: Block,
    e_full: Block,
    /// `φ_1 − 2φ_2` at `hA`.
    b_first: Block,
    /// `2φ_2` at `hA`.
    b_second: Block,
}

impl ModeBlocks {
    fn new(omega2: f64, h: f64) -> Self {
        let a: Block = [[0.0, 1.0], [-omega2, -1.0]];
        let zh = lin(&a, 0.5 * h, &a, 0.0);
        let z = lin(&a, h, &a, 0.0);
        let e_half = block_exp(omega2, 0.5 * h);
        let e_full = block_exp(omega2, h);
        let (phi1_half, _) = phi_functions(&zh, &e_half);
        let (phi1, phi2) = phi_functions(&z, &e_full);
        Self { e_half, phi1_half, e_full, b_first: lin(&phi1, 1.0, &phi2, -2.0), b_second: lin(&phi2, 2.0, &phi2, 0.0) }
    }
}

#[inline]
fn apply(b: &Block, u: Complex64, v: Complex64) -> (Complex64, Complex64) {
    (u * b[0][0] + v * b[0][1], u * b[1][0] + v * b[1][1])
}

/// Exponential integrator: each mode's linear block is propagated exactly and
/// the nonlinear term enters through a two-stage exponential Runge-Kutta
/// scheme with midpoint node (stiff order two):
///
/// ```text
/// X_mid = e^{hA/2} X + (h/2) φ_1(hA/2) N(X)
/// X'    = e^{hA} X + h [(φ_1 − 2φ_2)(hA) N(X) + 2φ_2(hA) N(X_mid)]
/// ```
///
/// Tangent vectors are advanced by the derivative of this map, so the
/// discrete tangent is exact for the discrete flow.
#[derive(Clone, Debug)]
pub struct Stepper {
    model: Arc<ChoModel>,
    dt: f64,
    blocks: Vec<ModeBlocks>,
    guard: f64,
}

impl Stepper {
    pub fn new(model: Arc<ChoModel>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt = {dt} must be positive")));
        }
        let alpha = model.alpha();
        let blocks = model.grid().k2().iter().map(|k2| ModeBlocks::new(k2 * k2 + alpha, dt)).collect();
        Ok(Self { model, dt, blocks, guard: 1e150 })
    }

    pub fn model(&self) -> &Arc<ChoModel> {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One-step propagator of the linear block of stored mode `i`.
    pub fn linear_block(&self, i: usize) -> Block {
        self.blocks[i].e_full
    }

    fn stage(&self, s: &State, n0: &[Complex64]) -> State {
        let h = self.dt;
        let mut mid = State { u: s.u.clone(), ut: s.ut.clone() };
        for (i, b) in self.blocks.iter().enumerate() {
            let (u, v) = apply(&b.e_half, s.u.coeffs[i], s.ut.coeffs[i]);
            let (fu, fv) = apply(&b.phi1_half, Complex64::new(0.0, 0.0), n0[i]);
            mid.u.coeffs[i] = u + fu * (0.5 * h);
            mid.ut.coeffs[i] = v + fv * (0.5 * h);
        }
        mid
    }

    fn combine(&self, s: &State, n0: &[Complex64], n1: &[Complex64]) -> State {
        let h = self.dt;
        let mut out = State { u: s.u.clone(), ut: s.ut.clone() };
        let zero = Complex64::new(0.0, 0.0);
        for (i, b) in self.blocks.iter().enumerate() {
            let (u, v) = apply(&b.e_full, s.u.coeffs[i], s.ut.coeffs[i]);
            let (au, av) = apply(&b.b_first, zero, n0[i]);
            let (bu, bv) = apply(&b.b_second, zero, n1[i]);
            out.u.coeffs[i] = u + (au + bu) * h;
            out.ut.coeffs[i] = v + (av + bv) * h;
        }
        out
    }

    fn check(&self, s: &State, t: f64) -> Result<()> {
        let norm = self.model.energy_space_norm(s);
        if !s.is_finite() || !norm.is_finite() || norm > self.guard {
            return Err(Error::BlowUp { time: t, what: format!("energy-space norm {norm:e} exceeds guard") });
        }
        Ok(())
    }

    /// Advances the state by one step of length `dt`.
    pub fn step(&self, s: &State) -> Result<State> {
        let n0 = self.model.forcing_term(&s.u);
        let mid = self.stage(s, &n0);
        let n1 = self.model.forcing_term(&mid.u);
        let out = self.combine(s, &n0, &n1);
        self.check(&out, f64::NAN)?;
        Ok(out)
    }

    /// `substeps` consecutive steps.
    pub fn advance(&self, s: &State, substeps: usize) -> Result<State> {
        let mut x = s.clone();
        for _ in 0..substeps {
            x = self.step(&x)?;
        }
        Ok(x)
    }

    /// Advances the base state and, with the derivative of the same map, every
    /// tangent vector in `tangents`.
    pub fn step_with_tangents(&self, s: &State, tangents: &mut [State]) -> Result<State> {
        let n0 = self.model.forcing_term(&s.u);
        let mid = self.stage(s, &n0);
        let n1 = self.model.forcing_term(&mid.u);
        let out = self.combine(s, &n0, &n1);
        self.check(&out, f64::NAN)?;
        let fp0 = self.model.derivative_values(&s.u);
        let fp1 = self.model.derivative_values(&mid.u);
        for w in tangents.iter_mut() {
            *w = self.tangent_step(w, &fp0, &fp1);
        }
        Ok(out)
    }

    /// Derivative of the step map in direction `w`, given `f'` at the two stage states.
    pub fn tangent_step(&self, w: &State, fprime_start: &[f64], fprime_mid: &[f64]) -> State {
        let d0 = self.model.tangent_term(fprime_start, &w.u);
        let wmid = self.stage(w, &d0);
        let d1 = self.model.tangent_term(fprime_mid, &wmid.u);
        self.combine(w, &d0, &d1)
    }

    /// `f'` on the padded grid at the start and midpoint stages of a step from `s`.
    pub fn stage_derivatives(&self, s: &State) -> (Vec<f64>, Vec<f64>) {
        let n0 = self.model.forcing_term(&s.u);
        let mid = self.stage(s, &n0);
        (self.model.derivative_values(&s.u), self.model.derivative_values(&mid.u))
    }

    pub fn zero_field(&self) -> SpectralField {
        SpectralField::zeros(self.model.grid())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::{GridSpec, Nonlinearity, PhysParams};

    #[test]
    fn block_exponential_matches_series() {
        for (omega2, h) in [(0.1, 0.3), (0.25, 1.0), (3.0, 0.2), (200.0, 0.01)] {
            let a: Block = [[0.0, 1.0], [-omega2, -1.0]];
            let z = lin(&a, h, &a, 0.0);
            let mut sum = IDENTITY;
            let mut term = IDENTITY;
            for m in 1..80 {
                term = lin(&mul(&term, &z), 1.0 / m as f64, &IDENTITY, 0.0);
                sum = lin(&sum, 1.0, &term, 1.0);
            }
            let e = block_exp(omega2, h);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((e[i][j] - sum[i][j]).abs() < 1e-12, "{omega2} {h}");
                }
            }
        }
    }

    #[test]
    fn phi_functions_agree_across_branches() {
        let a: Block = [[0.0, 1.0], [-0.9, -1.0]];
        for h in [0.9, 1.1] {
            let z = lin(&a, h, &a, 0.0);
            let (p1, p2) = phi_functions(&z, &block_exp(0.9, h));
            // φ_1 = I + Z φ_2
            let check = lin(&IDENTITY, 1.0, &mul(&z, &p2), 1.0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((check[i][j] - p1[i][j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_state_stays_fixed() {
        let m = Arc::new(ChoModel::new(GridSpec::new(1, 16, 1.0), PhysParams::new(1.0, Nonlinearity::Cubic)).unwrap());
        let st = Stepper::new(m.clone(), 0.01).unwrap();
        let z = State::zeros(m.grid());
        assert_eq!(st.advance(&z, 10).unwrap(), z);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let m = Arc::new(ChoModel::new(GridSpec::new(1, 16, 1.0), PhysParams::new(1.0, Nonlinearity::Cubic)).unwrap());
        assert!(Stepper::new(m.clone(), 0.0).is_err());
        assert!(Stepper::new(m, -1.0).is_err());
    }
}
