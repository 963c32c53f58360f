use std::f64::consts::PI;

use crate::cho_model::{GridSpec, Transform};
use crate::error::{Error, Result};

/// `6s⁵ − 15s⁴ + 10s³` clamped to `[0, 1]`: C² with vanishing first and second
/// derivatives at both ends.
pub fn smootherstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// Radial profile: 1 for `r ≤ R − width`, 0 for `r ≥ R`, smooth in between.
pub fn cutoff_profile(r: f64, radius: f64, width: f64) -> f64 {
    smootherstep((radius - r) / width)
}

/// Cutoff sampled on the grid of `transform`, with `r` measured from the
/// center of the fundamental cell.
pub fn cutoff_field(spec: &GridSpec, transform: &Transform, radius: f64, width: f64) -> Result<Vec<f64>> {
    let half_period = PI * spec.length_scale;
    if radius >= half_period {
        return Err(Error::CutoffTooLarge { radius, half_period });
    }
    if !(width > 0.0) || radius <= width {
        return Err(Error::Config(format!("cutoff radius {radius} must exceed the transition width {width}")));
    }
    let period = spec.period();
    let center = 0.5 * period;
    Ok((0..transform.n_points())
        .map(|idx| {
            let x = transform.point(idx, period);
            let r = (0..spec.spatial_dim).map(|a| (x[a] - center).powi(2)).sum::<f64>().sqrt();
            cutoff_profile(r, radius, width)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::Grid;

    #[test]
    fn plateau_values() {
        assert_eq!(cutoff_profile(0.0, 5.0, 1.0), 1.0);
        assert_eq!(cutoff_profile(4.0, 5.0, 1.0), 1.0);
        assert_eq!(cutoff_profile(5.0, 5.0, 1.0), 0.0);
        assert_eq!(cutoff_profile(7.0, 5.0, 1.0), 0.0);
    }

    #[test]
    fn profile_decreases_across_the_transition() {
        let mut prev = 1.0;
        for i in 1..=100 {
            let r = 4.0 + i as f64 / 100.0;
            let v = cutoff_profile(r, 5.0, 1.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn radius_beyond_half_period_is_rejected() {
        let spec = GridSpec::new(1, 16, 1.0);
        let g = Grid::new(spec.clone()).unwrap();
        let t = Transform::new(&g, 16).unwrap();
        assert!(matches!(cutoff_field(&spec, &t, PI, 1.0), Err(Error::CutoffTooLarge { .. })));
        let psi = cutoff_field(&spec, &t, PI - 0.5, 1.0).unwrap();
        assert_eq!(psi[8], 1.0);
    }
}
