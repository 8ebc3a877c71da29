use alloc::vec;
use alloc::vec::Vec;

use super::ModelError;

/// Cameron-Martin control sampled as piecewise-constant mode derivatives
/// `hdot^k(t_j)` on a uniform time grid `0 = t_0 < ... < t_M = T`.
///
/// The stored energy is `1/2 * sum_j dt * sum_k hdot_jk^2`; membership in the
/// ball `S_N` means `2 * energy <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    t_end: f64,
    n_steps: usize,
    n_modes: usize,
    /// Time-major: `coeffs[j * n_modes + k]`.
    coeffs: Vec<f64>,
}

impl Control {
    pub fn zero(t_end: f64, n_steps: usize, n_modes: usize) -> Result<Self, ModelError> {
        Self::from_coeffs(t_end, n_steps, n_modes, vec![0.0; n_steps * n_modes])
    }

    pub fn from_coeffs(
        t_end: f64,
        n_steps: usize,
        n_modes: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "control horizon",
                value: t_end,
            });
        }
        if n_steps == 0 {
            return Err(ModelError::ControlShape("need at least one time cell"));
        }
        if coeffs.len() != n_steps * n_modes {
            return Err(ModelError::ControlShape(
                "coefficient count must be n_steps * n_modes",
            ));
        }
        for &c in &coeffs {
            if !c.is_finite() {
                return Err(ModelError::InvalidParameter {
                    what: "control coefficient",
                    value: c,
                });
            }
        }
        Ok(Self {
            t_end,
            n_steps,
            n_modes,
            coeffs,
        })
    }

    /// Fill mode `k` (1-based) from a function of time evaluated at cell
    /// midpoints, leaving other modes untouched.
    pub fn with_mode(
        mut self,
        k: usize,
        mut profile: impl FnMut(f64) -> f64,
    ) -> Result<Self, ModelError> {
        if k == 0 || k > self.n_modes {
            return Err(ModelError::ModeOutOfRange {
                k,
                max: self.n_modes,
            });
        }
        let dt = self.dt();
        for j in 0..self.n_steps {
            let t_mid = (j as f64 + 0.5) * dt;
            self.coeffs[j * self.n_modes + k - 1] = profile(t_mid);
        }
        self.validate_finite()?;
        Ok(self)
    }

    /// Constant-in-time control in a single mode.
    pub fn constant_mode(
        t_end: f64,
        n_steps: usize,
        n_modes: usize,
        k: usize,
        value: f64,
    ) -> Result<Self, ModelError> {
        Self::zero(t_end, n_steps, n_modes)?.with_mode(k, |_| value)
    }

    fn validate_finite(&self) -> Result<(), ModelError> {
        for &c in &self.coeffs {
            if !c.is_finite() {
                return Err(ModelError::InvalidParameter {
                    what: "control coefficient",
                    value: c,
                });
            }
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `hdot^k(t_j)` by time-cell index, `k` 0-based here.
    pub fn coeff(&self, j: usize, k_idx: usize) -> f64 {
        self.coeffs[j * self.n_modes + k_idx]
    }

    /// Piecewise-constant lookup of `hdot^k(t)`, `k` 0-based.
    pub fn value_at(&self, t: f64, k_idx: usize) -> f64 {
        let cell = ((t / self.dt()) as usize).min(self.n_steps - 1);
        self.coeff(cell, k_idx)
    }

    /// `1/2 int_0^T ||hdot||^2 dt`.
    pub fn energy(&self) -> f64 {
        0.5 * self.cm_norm_sq()
    }

    /// `int_0^T ||hdot||^2 dt = 2 * energy`.
    pub fn cm_norm_sq(&self) -> f64 {
        let dt = self.dt();
        dt * self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    /// Whether the control lies in `S_N`.
    pub fn in_energy_ball(&self, n: f64) -> bool {
        self.cm_norm_sq() <= n
    }

    pub fn add(&self, rhs: &Control) -> Result<Control, ModelError> {
        if self.t_end != rhs.t_end || self.n_steps != rhs.n_steps || self.n_modes != rhs.n_modes {
            return Err(ModelError::ControlShape("controls live on different grids"));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(rhs.coeffs.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Control {
            t_end: self.t_end,
            n_steps: self.n_steps,
            n_modes: self.n_modes,
            coeffs,
        })
    }

    pub fn scale(&self, factor: f64) -> Control {
        Control {
            t_end: self.t_end,
            n_steps: self.n_steps,
            n_modes: self.n_modes,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }
}
