//! Modified time-dependent metric for the tangent dynamics, its energy-rate
//! form, the splitting into a dissipative and a compact part, and the
//! dimension-bound pipeline built on them.

mod cutoff;
mod dimension;
mod forms;
mod splitting;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cutoff::{cutoff_field, cutoff_profile, smootherstep};
pub use dimension::{
    dimension_bound, trace_d_along, DimensionOptions, DimensionReport, DimensionStatus, TraceCurves, TrajectoryMetric,
};
pub use forms::{equivalence_of, generalized_eigenvalues_desc, BaseForms, MetricForms};
pub use splitting::{compact_form_spectrum, splitting_estimate, validate_splitting, SplittingOptions, SplittingReport};

use crate::cho_model::{ChoModel, State};
use crate::error::{Error, Result};

fn default_width() -> f64 {
    1.0
}

/// Metric parameters as configured; unset entries are chosen by [`resolve_metric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    /// Weight of the cross terms; defaults to `min(0.1, α/4)`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Weight `L` of the smoothed cutoff term; chosen automatically when unset.
    #[serde(default)]
    pub lweight: Option<f64>,
    /// Cutoff radius `R`; defaults to `πℓ − 1`.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_width")]
    pub transition_width: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { delta: None, lweight: None, radius: None, transition_width: default_width() }
    }
}

/// Fully specified metric parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMetric {
    pub delta: f64,
    pub lweight: f64,
    pub radius: f64,
    pub transition_width: f64,
}

impl ResolvedMetric {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta = {} must lie in [0, 1)", self.delta)));
        }
        if !(self.lweight >= 0.0) || !self.lweight.is_finite() {
            return Err(Error::Config(format!("lweight = {} must be nonnegative", self.lweight)));
        }
        Ok(())
    }
}

/// Smallest accepted `λ_min` of the metric relative to the energy norm when choosing `L`.
pub const LWEIGHT_FLOOR: f64 = 0.1;

/// Candidate weights tried in order: 0, then powers of two up to 2^20.
pub fn lweight_candidates() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=20).map(|k| 2f64.powi(k)))
}

/// Fills in defaults. When `L` is unset, picks the first candidate for which
/// the metric has `λ_min > 0.1` at every sample state.
pub fn resolve_metric(model: &Arc<ChoModel>, params: &MetricParams, samples: &[State]) -> Result<MetricForms> {
    let alpha = model.alpha();
    let delta = params.delta.unwrap_or_else(|| (alpha / 4.0).min(0.1));
    let radius = params.radius.unwrap_or(PI * model.grid().spec().length_scale - params.transition_width);
    let base = ResolvedMetric {
        delta,
        lweight: params.lweight.unwrap_or(0.0),
        radius,
        transition_width: params.transition_width,
    };
    let forms = MetricForms::new(model.clone(), base)?;
    if params.lweight.is_some() {
        return Ok(forms);
    }
    let mut worst = f64::NAN;
    for lw in lweight_candidates() {
        let f = forms.with_lweight(lw)?;
        worst = samples.iter().map(|s| f.extreme_eigenvalues(s).0).fold(f64::INFINITY, f64::min);
        if worst > LWEIGHT_FLOOR {
            return Ok(f);
        }
    }
    Err(Error::NotPositiveDefinite { context: "no corrector weight up to 2^20 makes the metric coercive".into(), min_eigenvalue: worst })
}
