use serde::{Deserialize, Serialize};

/// Pointwise nonlinearity `f` with its derivatives and antiderivative `F`, `F(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    /// `f(u) = u³`.
    Cubic,
    /// `f(u) = λ u`.
    Linear { lambda: f64 },
    /// `f(u) = u |u|^{p-1} + λ u`.
    PowerLaw { exponent: f64, lambda: f64 },
}

impl Nonlinearity {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::Linear { lambda } => lambda * u,
            Nonlinearity::PowerLaw { exponent: p, lambda } => u * u.abs().powf(p - 1.0) + lambda * u,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::Linear { lambda } => lambda,
            Nonlinearity::PowerLaw { exponent: p, lambda } => p * u.abs().powf(p - 1.0) + lambda,
        }
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero | Nonlinearity::Linear { .. } => 0.0,
            Nonlinearity::Cubic => 6.0 * u,
            Nonlinearity::PowerLaw { exponent: p, .. } => {
                if u == 0.0 {
                    0.0
                } else {
                    p * (p - 1.0) * u.abs().powf(p - 2.0) * u.signum()
                }
            }
        }
    }

    pub fn antiderivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Cubic => 0.25 * u.powi(4),
            Nonlinearity::Linear { lambda } => 0.5 * lambda * u * u,
            Nonlinearity::PowerLaw { exponent: p, lambda } => u.abs().powf(p + 1.0) / (p + 1.0) + 0.5 * lambda * u * u,
        }
    }

    /// Polynomial degree of `f`, or `None` when `f` is not a polynomial.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match *self {
            Nonlinearity::Zero => Some(0),
            Nonlinearity::Cubic => Some(3),
            Nonlinearity::Linear { .. } => Some(1),
            Nonlinearity::PowerLaw { exponent, .. } => {
                let odd_integer = exponent.fract() == 0.0 && (exponent as i64) % 2 == 1;
                odd_integer.then_some(exponent as u32)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Linear { lambda } => lambda == 0.0,
            _ => false,
        }
    }

    /// Growth exponent `κ` in `|f''(u)| ≤ C (1 + |u|^{3-κ})`.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            Nonlinearity::Zero | Nonlinearity::Linear { .. } => 3.0,
            Nonlinearity::Cubic => 2.0,
            Nonlinearity::PowerLaw { exponent, .. } => (5.0 - exponent).min(3.0),
        }
    }

    /// Constant `L` used when sampling `F(u) ≤ L f(u) u + K u²`.
    pub fn split_weight(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 1.0,
            Nonlinearity::Cubic => 0.25,
            Nonlinearity::Linear { .. } => 0.5,
            Nonlinearity::PowerLaw { exponent, lambda } => {
                if lambda > 0.0 {
                    0.5
                } else {
                    1.0 / (exponent + 1.0)
                }
            }
        }
    }

    /// Samples the structural conditions on `u ∈ [-10, 10]`.
    pub fn validate(&self) -> NonlinearityReport {
        const SAMPLES: usize = 4096;
        let us: Vec<f64> = (0..SAMPLES).map(|i| -10.0 + 20.0 * i as f64 / (SAMPLES - 1) as f64).collect();
        let mut report = NonlinearityReport {
            passes: true,
            violation: None,
            witnessed_l: self.split_weight(),
            witnessed_k: 0.0,
            witnessed_c: 0.0,
            kappa: self.growth_exponent(),
            twice_differentiable: true,
            notes: Vec::new(),
        };
        if let Nonlinearity::PowerLaw { exponent, lambda } = *self {
            if !(exponent > 1.0 && exponent < 5.0) {
                report.fail(format!("exponent {exponent} outside (1, 5)"), None);
            }
            if lambda < 0.0 {
                report.fail(format!("lambda {lambda} must be nonnegative"), None);
            }
            if exponent < 2.0 {
                report.twice_differentiable = false;
                report.notes.push("f'' is unbounded near u = 0 for exponent < 2".into());
            }
        }
        if self.value(0.0) != 0.0 {
            report.fail("f(0) = 0".into(), Some(0.0));
        }
        for &u in &us {
            let fu = self.value(u) * u;
            if fu < 0.0 {
                report.fail("f(u) u >= 0".into(), Some(u));
                break;
            }
        }
        for &u in &us {
            if u != 0.0 {
                let k = (self.antiderivative(u) - report.witnessed_l * self.value(u) * u) / (u * u);
                report.witnessed_k = report.witnessed_k.max(k);
            }
            let c = self.second_derivative(u).abs() / (1.0 + u.abs().powf(3.0 - report.kappa));
            if c.is_finite() {
                report.witnessed_c = report.witnessed_c.max(c);
            }
        }
        report
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearityReport {
    pub passes: bool,
    /// First violated condition and the sample where it failed.
    pub violation: Option<(String, Option<f64>)>,
    pub witnessed_l: f64,
    pub witnessed_k: f64,
    pub witnessed_c: f64,
    pub kappa: f64,
    pub twice_differentiable: bool,
    pub notes: Vec<String>,
}

impl NonlinearityReport {
    fn fail(&mut self, what: String, at: Option<f64>) {
        if self.passes {
            self.violation = Some((what, at));
        }
        self.passes = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_passes_with_quarter_weight() {
        let r = Nonlinearity::Cubic.validate();
        assert!(r.passes);
        assert_eq!(r.witnessed_l, 0.25);
        assert_abs_diff_eq!(r.witnessed_k, 0.0, epsilon = 1e-12);
        assert_eq!(r.kappa, 2.0);
        assert_abs_diff_eq!(r.witnessed_c, 60.0 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_passes_with_flat_second_derivative() {
        let r = Nonlinearity::Linear { lambda: 1.0 }.validate();
        assert!(r.passes);
        assert_eq!(r.kappa, 3.0);
        assert_eq!(r.witnessed_c, 0.0);
    }

    #[test]
    fn negative_identity_fails_sign_condition() {
        let r = Nonlinearity::Linear { lambda: -1.0 }.validate();
        assert!(!r.passes);
        let (what, at) = r.violation.unwrap();
        assert!(what.contains("f(u) u"));
        assert!(at.unwrap() != 0.0);
    }

    #[test]
    fn derivatives_are_consistent() {
        let h = 1e-5;
        for nl in [
            Nonlinearity::Cubic,
            Nonlinearity::Linear { lambda: 0.4 },
            Nonlinearity::PowerLaw { exponent: 3.5, lambda: 0.2 },
        ] {
            for u in [-1.7, -0.3, 0.4, 2.2] {
                let df = (nl.value(u + h) - nl.value(u - h)) / (2.0 * h);
                let d2f = (nl.derivative(u + h) - nl.derivative(u - h)) / (2.0 * h);
                let dfa = (nl.antiderivative(u + h) - nl.antiderivative(u - h)) / (2.0 * h);
                assert_abs_diff_eq!(df, nl.derivative(u), epsilon = 1e-7);
                assert_abs_diff_eq!(d2f, nl.second_derivative(u), epsilon = 1e-6);
                assert_abs_diff_eq!(dfa, nl.value(u), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn sub_quadratic_power_is_flagged() {
        let r = Nonlinearity::PowerLaw { exponent: 1.5, lambda: 0.0 }.validate();
        assert!(!r.twice_differentiable);
        assert!(Nonlinearity::PowerLaw { exponent: 3.0, lambda: 0.0 }.polynomial_degree() == Some(3));
    }
}
