use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;

/// Coefficients of `∂_t u + ∂_x³ u = μ ∂_x(|u|^{2α} u)`.
///
/// `mu > 0` is defocusing, `mu < 0` focusing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(mu: f64, alpha: f64) -> Result<Self> {
        let p = Self { mu, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu == 0.0 {
            return Err(Error::InvalidParams(format!("mu = {} must be a nonzero real", self.mu)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha = {} must be positive", self.alpha)));
        }
        Ok(())
    }

    /// Whether `8/5 < α < 2`, the range covered by the scattering theory.
    pub fn in_theory_range(&self) -> bool {
        self.alpha > 1.6 && self.alpha < 2.0
    }

    pub fn is_focusing(&self) -> bool {
        self.mu < 0.0
    }

    /// `|u|^{2α} u`, evaluated as `(u²)^α u`.
    pub fn power(&self, u: f64) -> f64 {
        (u * u).powf(self.alpha) * u
    }

    /// `|u|^{2α}`.
    pub fn weight(&self, u: f64) -> f64 {
        (u * u).powf(self.alpha)
    }

    pub fn power_field(&self, u: &RealField) -> RealField {
        u.map(|v| self.power(v))
    }

    pub fn weight_field(&self, u: &RealField) -> RealField {
        u.map(|v| self.weight(v))
    }

    /// `2(2α+1)`, the Lebesgue exponent of criterion (iii).
    pub fn decay_exponent_p(&self) -> f64 {
        2.0 * (2.0 * self.alpha + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelParams::new(0.0, 1.8).is_err());
        assert!(ModelParams::new(1.0, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 1.8).unwrap().is_focusing());
        assert!(ModelParams::new(1.0, 1.8).unwrap().in_theory_range());
        assert!(!ModelParams::new(1.0, 1.0).unwrap().in_theory_range());
    }

    #[test]
    fn power_is_odd_and_vanishes_at_zero() {
        let p = ModelParams::new(1.0, 1.8).unwrap();
        assert_eq!(p.power(0.0), 0.0);
        assert!((p.power(0.5) + p.power(-0.5)).abs() < 1e-16);
        assert!((p.power(2.0) - 2f64.powf(4.6)).abs() < 1e-12);
        assert!((p.decay_exponent_p() - 9.2).abs() < 1e-15);
    }
}
