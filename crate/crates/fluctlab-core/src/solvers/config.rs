use super::SolverError;
use crate::model::{FluxModel, TorusGrid};

/// Numerical flux choice for the finite-volume transport sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// Monotone, entropy-consistent split flux; the default.
    EngquistOsher,
    /// Classical Lax-Friedrichs with `lambda = dx / dt`.
    LaxFriedrichs,
}

/// Stepper parameters shared by every solver.
///
/// The time step is fixed a priori from the CFL bound evaluated on an assumed
/// state range (initial data widened by `range_margin`) and, with explicit
/// diffusion, from `dt * eta / dx^2 <= 0.4`. Fixing the grid up front keeps
/// Brownian increments on one grid so coupled runs across `eps` and against
/// the exact linear solvers consume identical noise. Every step re-checks
/// the realized CFL number and aborts if the state escapes the assumed range.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    /// CFL number in `(0, 1]`.
    pub cfl: f64,
    /// Horizon `T`.
    pub t_end: f64,
    /// Viscosity `eta >= 0`; `0` disables the diffusion sub-step.
    pub viscosity: f64,
    pub scheme: Scheme,
    /// Record every `output_stride`-th step (plus `t = 0` and `t = T`).
    pub output_stride: usize,
    /// Widening of the initial-data range used for the a-priori speed bound.
    pub range_margin: f64,
    /// Abort if the planned step falls below this floor.
    pub dt_floor: f64,
    /// Abort when `|u|` exceeds this guard; the model has all moments, so
    /// numerical blowup signals a configuration error.
    pub blowup_guard: f64,
}

/// Stability limit for the explicit diffusion sub-step.
pub const DIFFUSION_NUMBER: f64 = 0.4;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 1.0,
            viscosity: 0.0,
            scheme: Scheme::EngquistOsher,
            output_stride: 1,
            range_margin: 2.0,
            dt_floor: 1e-9,
            blowup_guard: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::InvalidConfig("cfl must lie in (0, 1]"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(SolverError::InvalidConfig("t_end must be positive"));
        }
        if !(self.viscosity >= 0.0) || !self.viscosity.is_finite() {
            return Err(SolverError::InvalidConfig("viscosity must be >= 0"));
        }
        if self.output_stride == 0 {
            return Err(SolverError::InvalidConfig("output_stride must be >= 1"));
        }
        if !(self.range_margin >= 0.0) || !self.range_margin.is_finite() {
            return Err(SolverError::InvalidConfig("range_margin must be >= 0"));
        }
        Ok(())
    }

    pub fn with_viscosity(mut self, eta: f64) -> Self {
        self.viscosity = eta;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    /// Largest stable step for states in `[lo, hi]` on `grid`.
    pub fn dt_bound(&self, flux: &FluxModel, lo: f64, hi: f64, grid: TorusGrid) -> f64 {
        let dx = grid.dx();
        let speed = flux.max_speed(lo, hi);
        let mut bound = if speed > 0.0 {
            self.cfl * dx / speed
        } else {
            f64::INFINITY
        };
        if self.viscosity > 0.0 {
            bound = bound.min(DIFFUSION_NUMBER * dx * dx / self.viscosity);
        }
        bound.min(self.t_end)
    }
}

/// Uniform step grid covering `[0, T]` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    /// Largest uniform grid with `dt <= dt_bound` that lands on `t_end`.
    pub fn fit(t_end: f64, dt_bound: f64, dt_floor: f64) -> Result<Self, SolverError> {
        if !(dt_bound > 0.0) {
            return Err(SolverError::InvalidConfig("time step bound must be positive"));
        }
        let n_steps = crate::math::ceil(t_end / dt_bound).max(1.0) as usize;
        let dt = t_end / n_steps as f64;
        if dt < dt_floor {
            return Err(SolverError::DtUnderflow {
                dt,
                floor: dt_floor,
            });
        }
        Ok(Self { n_steps, dt })
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}
