use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::forms::{equivalence_of, MetricForms};
use crate::cho_model::State;
use crate::error::{Error, Result};
use crate::liouville::{compact_constant, minimal_dimension};
use crate::multilinear::{symmetric_eigenvalues_desc, symmetrize};

/// Fractions of the largest admissible dissipation rate tried by the scan.
const GAMMA_FRACTIONS: [f64; 6] = [0.999, 0.99, 0.9, 0.75, 0.5, 0.25];

#[derive(Clone, Debug)]
pub struct SplittingOptions {
    /// Random directions per sample state used to validate the chosen pair.
    pub n_directions: usize,
    pub seed: u64,
    /// Allowed excess relative to `‖ξ‖²_E`.
    pub tol: f64,
    /// Only accept `C1 = 0`, shrinking the dissipation rate as needed.
    pub force_zero_c1: bool,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        Self { n_directions: 64, seed: 0, tol: 1e-8, force_zero_c1: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingCandidate {
    pub gamma: f64,
    pub c1: f64,
    pub c_k: f64,
    pub formula_d: usize,
}

/// A splitting `M(t) ≤ −γ‖·‖²_E + C1‖ψ ·‖²` valid on the sampled states.
#[derive(Clone, Debug, Serialize)]
pub struct SplittingReport {
    pub gamma: f64,
    pub c1: f64,
    /// `−max λ_max` of `M` compressed onto the kernel of the compact form.
    pub gamma_max: f64,
    /// Metric equivalence constant over the samples.
    pub c: f64,
    /// Spectrum of `C1 K` relative to the energy norm.
    pub k_spectrum: Vec<f64>,
    pub c_k: f64,
    pub formula_d: usize,
    pub candidates: Vec<SplittingCandidate>,
    /// Largest `(M ξ, ξ) + γ‖ξ‖² − C1‖ψ w‖²` over unit validation directions.
    pub worst_excess: f64,
    /// Energy coordinates of the direction attaining `worst_excess`.
    pub worst_direction: Vec<f64>,
}

/// Spectrum of `‖ψ w‖²` relative to the energy norm, nonincreasing.
pub fn compact_form_spectrum(forms: &MetricForms) -> Vec<f64> {
    symmetric_eigenvalues_desc(forms.compact_form())
}

fn top_eigen(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let (i, &l) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
    (l, eig.eigenvectors.column(i).into_owned())
}

fn worst_top(ms: &[DMatrix<f64>], shift: f64, k: &DMatrix<f64>, c1: f64) -> (f64, usize, DVector<f64>) {
    let n = k.nrows();
    let mut best = (f64::NEG_INFINITY, 0, DVector::zeros(n));
    for (s, m) in ms.iter().enumerate() {
        let op = m + DMatrix::identity(n, n) * shift - k * c1;
        let (l, v) = top_eigen(&op);
        if l > best.0 {
            best = (l, s, v);
        }
    }
    best
}

/// Smallest `C1` (to relative accuracy 1e-6, rounded up) making every
/// `M_s + γ I − C1 K` negative semidefinite, if one below 1e15 exists.
fn minimal_c1(ms: &[DMatrix<f64>], gamma: f64, k: &DMatrix<f64>) -> Option<f64> {
    if worst_top(ms, gamma, k, 0.0).0 <= 0.0 {
        return Some(0.0);
    }
    let mut hi = 1.0;
    while worst_top(ms, gamma, k, hi).0 > 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return None;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if worst_top(ms, gamma, k, mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Chooses `(γ, C1)` on the sample states: scans `γ` below the largest value
/// compatible with the compact form, finds the least `C1` for each, and keeps
/// the pair with the smallest dimension estimate (ties go to the larger `γ`).
pub fn splitting_estimate(
    forms: &MetricForms,
    samples: &[State],
    times: &[f64],
    opts: &SplittingOptions,
) -> Result<SplittingReport> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let n = forms.dim();
    let at: Vec<_> = samples.iter().map(|s| forms.at(s)).collect();
    let ms: Vec<DMatrix<f64>> = at.iter().map(|b| b.m.clone()).collect();
    let c = at.iter().map(|b| equivalence_of(&b.v)).collect::<Result<Vec<f64>>>()?.into_iter().fold(1.0, f64::max);
    let k = symmetrize(forms.compact_form());
    let time_of = |s: usize| times.get(s).copied().unwrap_or(f64::NAN);

    // kernel of the compact form
    let eig = SymmetricEigen::new(k.clone());
    let kmax = eig.eigenvalues.amax();
    let kernel: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= 1e-10 * kmax)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let gamma_max = if kernel.is_empty() {
        ms.iter().map(|m| symmetric_eigenvalues_desc(m).last().unwrap().abs()).fold(0.0, f64::max)
    } else {
        let z = DMatrix::from_columns(&kernel);
        let mut worst = (f64::NEG_INFINITY, 0, DVector::zeros(n));
        for (s, m) in ms.iter().enumerate() {
            let (l, v) = top_eigen(&(z.transpose() * m * &z));
            if l > worst.0 {
                worst = (l, s, &z * v);
            }
        }
        if worst.0 >= 0.0 {
            return Err(Error::SplittingViolated {
                time: time_of(worst.1),
                excess: worst.0,
                direction: worst.2.iter().copied().collect(),
            });
        }
        -worst.0
    };

    let k_eigs = symmetric_eigenvalues_desc(&k);
    let candidate = |gamma: f64, c1: f64| {
        let spec: Vec<f64> = k_eigs.iter().map(|x| x * c1).collect();
        let c_k = compact_constant(&spec, gamma, c);
        SplittingCandidate { gamma, c1, c_k, formula_d: minimal_dimension(c_k, gamma, c) }
    };
    let mut candidates = Vec::new();
    let (top0, s0, v0) = worst_top(&ms, 0.0, &k, 0.0);
    if top0 < 0.0 {
        candidates.push(candidate(-top0 * (1.0 - 1e-9), 0.0));
    } else if opts.force_zero_c1 {
        return Err(Error::SplittingViolated { time: time_of(s0), excess: top0, direction: v0.iter().copied().collect() });
    }
    if !opts.force_zero_c1 {
        for f in GAMMA_FRACTIONS {
            let gamma = f * gamma_max;
            if let Some(c1) = minimal_c1(&ms, gamma, &k) {
                candidates.push(candidate(gamma, c1));
            }
        }
    }
    let best = candidates
        .iter()
        .min_by(|a, b| a.formula_d.cmp(&b.formula_d).then(b.gamma.total_cmp(&a.gamma)))
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("no admissible splitting constant found".into()))?;

    let (worst_excess, worst_direction) = validate_splitting(forms, samples, best.gamma, best.c1, opts.n_directions, opts.seed)?;
    if worst_excess > opts.tol {
        return Err(Error::SplittingViolated { time: f64::NAN, excess: worst_excess, direction: worst_direction });
    }
    Ok(SplittingReport {
        gamma: best.gamma,
        c1: best.c1,
        gamma_max,
        c,
        k_spectrum: k_eigs.iter().map(|x| x * best.c1).collect(),
        c_k: best.c_k,
        formula_d: best.formula_d,
        candidates,
        worst_excess,
        worst_direction,
    })
}

/// Evaluates `(M ξ, ξ) + γ‖ξ‖²_E − C1‖ψ w‖²` on random unit directions at each
/// state, using the field-level forms. Returns the largest value and its direction.
pub fn validate_splitting(
    forms: &MetricForms,
    states: &[State],
    gamma: f64,
    c1: f64,
    n_directions: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let coords = forms.coords();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for base in states {
        for _ in 0..n_directions {
            let x: DVector<f64> = DVector::from_fn(coords.dim(), |_, _| StandardNormal.sample(&mut rng));
            let x = &x / x.norm();
            let xi = coords.to_state(&x)?;
            let q = forms.rate_form(base, &xi)? + gamma * forms.model().energy_space_norm_sq(&xi) - c1 * forms.compact_norm_sq(&xi);
            if q > worst.0 {
                worst = (q, x.iter().copied().collect());
            }
        }
    }
    Ok(worst)
}
