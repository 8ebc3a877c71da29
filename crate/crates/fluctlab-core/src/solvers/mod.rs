//! Time steppers for the nonlinear conservation laws: deterministic,
//! viscous, stochastic, and controlled, all built on one Lie-splitting
//! driver so coupled comparisons share the stepping path exactly.

mod config;
mod evolve;
mod fv;
mod trajectory;

use alloc::format;
use alloc::string::String;

pub use config::{Scheme, SolverConfig, TimeGrid, DIFFUSION_NUMBER};
pub use trajectory::{derive_fluctuation, Trajectory, TrajectoryMeta};

use crate::math;
use crate::model::{
    Control, DeviationScale, Field, FluxModel, ModelError, NoiseModel, TorusGrid, WienerPath,
};
use evolve::{evolve, Forcing};

/// Errors raised by the steppers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver config: {0}")]
    InvalidConfig(&'static str),
    #[error("time step {dt:e} fell below the configured floor {floor:e}")]
    DtUnderflow { dt: f64, floor: f64 },
    #[error("CFL violated at step {step}: speed {speed:e} needs dt <= {required:e}")]
    CflViolation {
        step: usize,
        speed: f64,
        required: f64,
    },
    #[error("non-finite state at step {step}, cell {cell}")]
    NonFiniteState { step: usize, cell: usize },
    #[error("state magnitude {magnitude:e} passed the blowup guard at step {step}")]
    Blowup { step: usize, magnitude: f64 },
    #[error("path mismatch: {0}")]
    PathMismatch(&'static str),
    #[error("fluctuation rescaling needs eps > 0")]
    ZeroEpsilon,
    #[error("trajectories are sampled on different time grids")]
    TimeMismatch,
    #[error("trajectory times must start at 0 and strictly increase")]
    BadTimes,
    #[error("epsilon must lie in [0, 1] for the perturbed equation, got {0}")]
    BadEpsilon(f64),
}

impl SolverError {
    /// Annotate with experiment context, e.g. the `(eps, replicate)` pair.
    pub fn annotate(&self, context: &str) -> String {
        format!("{context}: {self}")
    }
}

/// State range assumed for the a-priori time grid: initial data widened by
/// the configured margin.
fn assumed_range(u0: &Field, cfg: &SolverConfig) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in u0.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo - cfg.range_margin, hi + cfg.range_margin)
}

/// Plan the a-priori uniform time grid for initial data `u0`; exposed so
/// experiments can take the minimum over several coupled runs.
pub fn plan_time_grid(
    u0: &Field,
    flux: &FluxModel,
    cfg: &SolverConfig,
) -> Result<TimeGrid, SolverError> {
    cfg.validate()?;
    u0.check_finite()?;
    let (lo, hi) = assumed_range(u0, cfg);
    TimeGrid::fit(
        cfg.t_end,
        cfg.dt_bound(flux, lo, hi, u0.grid()),
        cfg.dt_floor,
    )
}

/// Entropy-consistent finite-volume evolution of `du + div A(u) dt = 0`;
/// requires `cfg.viscosity == 0`. Conservative (the interface fluxes
/// telescope) and monotone with the Engquist-Osher scheme under CFL.
pub fn solve_deterministic(
    u0: &Field,
    flux: &FluxModel,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if cfg.viscosity != 0.0 {
        return Err(SolverError::InvalidConfig(
            "solve_deterministic needs viscosity = 0; use solve_viscous_deterministic",
        ));
    }
    let time = plan_time_grid(u0, flux, cfg)?;
    evolve(u0, flux, cfg, time, Forcing::None, TrajectoryMeta::default())
}

/// Viscous regularisation `du + div A(u) dt = eta Lap(u) dt` with explicit
/// centered diffusion; requires `cfg.viscosity > 0`.
pub fn solve_viscous_deterministic(
    u0: &Field,
    flux: &FluxModel,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if !(cfg.viscosity > 0.0) {
        return Err(SolverError::InvalidConfig(
            "solve_viscous_deterministic needs viscosity > 0",
        ));
    }
    let time = plan_time_grid(u0, flux, cfg)?;
    evolve(u0, flux, cfg, time, Forcing::None, TrajectoryMeta::default())
}

/// The perturbed equation `du + div A(u) dt = sqrt(eps) Phi(u) dW` (plus
/// `eta Lap(u) dt` when configured), split as transport, diffusion, then an
/// Euler-Maruyama kick with `g_k` sampled at cell centers. `eps` lies in
/// `[0, 1]`; with `eps = 0` or an empty noise family the noise sub-step is
/// skipped entirely, so the run is bit-identical to the deterministic
/// stepper on the same grid.
pub fn solve_spde(
    u0: &Field,
    flux: &FluxModel,
    noise: &NoiseModel,
    path: &WienerPath,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(SolverError::BadEpsilon(eps));
    }
    let time = TimeGrid {
        n_steps: path.n_steps(),
        dt: path.dt(),
    };
    check_horizon(&time, cfg)?;
    let meta = TrajectoryMeta {
        eps: Some(eps),
        eta: cfg.viscosity,
        ..TrajectoryMeta::default()
    };
    let forcing = if eps == 0.0 || noise.is_empty() {
        Forcing::None
    } else {
        Forcing::Stochastic {
            noise,
            path,
            sqrt_eps: math::sqrt(eps),
        }
    };
    evolve(u0, flux, cfg, time, forcing, meta)
}

/// The controlled moderate-deviation equation started from `X(0) = 0`:
///
/// ```text
///   dX + div Psi(X) dt = eta Lap(X) dt
///       + lambda(eps)^{-1} Phi(1 + mu X) dW + Phi(1 + mu X) hdot(t) dt,
/// ```
///
/// with `mu = sqrt(eps) lambda(eps)` and `Psi` the rescaled flux, expanded
/// to polynomial coefficients for the transport sub-step. Passing the zero
/// control simulates the bare moderate-deviation process `X^eps`.
pub fn solve_controlled_spde(
    grid: TorusGrid,
    flux: &FluxModel,
    noise: &NoiseModel,
    path: &WienerPath,
    eps: f64,
    scale: &DeviationScale,
    control: &Control,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let psi = flux.transformed(eps, scale)?;
    let lambda = scale.lambda(eps)?;
    let mu = scale.mu(eps)?;
    if control.n_modes() != noise.n_modes() {
        return Err(SolverError::PathMismatch(
            "control mode count does not match the noise model",
        ));
    }
    let time = TimeGrid {
        n_steps: path.n_steps(),
        dt: path.dt(),
    };
    check_horizon(&time, cfg)?;
    if (control.t_end() - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
        return Err(SolverError::PathMismatch(
            "control horizon does not match cfg.t_end",
        ));
    }
    let u0 = Field::zeros(grid);
    let meta = TrajectoryMeta {
        eps: Some(eps),
        eta: cfg.viscosity,
        alpha: Some(scale.alpha()),
        ..TrajectoryMeta::default()
    };
    evolve(
        &u0,
        &psi,
        cfg,
        time,
        Forcing::Controlled {
            noise,
            path,
            inv_lambda: 1.0 / lambda,
            mu,
            control,
        },
        meta,
    )
}

fn check_horizon(time: &TimeGrid, cfg: &SolverConfig) -> Result<(), SolverError> {
    if (time.t_end() - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
        return Err(SolverError::PathMismatch(
            "path horizon does not match cfg.t_end",
        ));
    }
    Ok(())
}
