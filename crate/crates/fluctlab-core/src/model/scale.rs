use super::ModelError;
use crate::math;

/// Moderate-deviation scale `lambda(eps) = eps^{-alpha}` with `alpha` in
/// `(0, 1/2)`, so that `lambda(eps) -> inf` while
/// `sqrt(eps) * lambda(eps) = eps^{1/2 - alpha} -> 0` as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DeviationScale {
    alpha: f64,
}

impl DeviationScale {
    pub fn new(alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(ModelError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `lambda(eps) = eps^{-alpha}`; requires `eps` in `(0, 1)`.
    pub fn lambda(&self, eps: f64) -> Result<f64, ModelError> {
        check_eps(eps)?;
        Ok(math::pow(eps, -self.alpha))
    }

    /// `mu(eps) = sqrt(eps) * lambda(eps) = eps^{1/2 - alpha}`.
    pub fn mu(&self, eps: f64) -> Result<f64, ModelError> {
        check_eps(eps)?;
        Ok(math::pow(eps, 0.5 - self.alpha))
    }
}

fn check_eps(eps: f64) -> Result<(), ModelError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ModelError::EpsilonOutOfRange(eps));
    }
    Ok(())
}
