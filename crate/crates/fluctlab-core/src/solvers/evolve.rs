use alloc::vec;
use alloc::vec::Vec;

use super::config::{SolverConfig, TimeGrid, DIFFUSION_NUMBER};
use super::fv::{diffusion_step, flux_step, FluxKernel};
use super::trajectory::{Trajectory, TrajectoryMeta};
use super::SolverError;
use crate::model::{BasisTable, Control, Field, FluxModel, NoiseModel, StateFactor, WienerPath};

/// What gets added in the stochastic sub-step of the Lie splitting.
pub(crate) enum Forcing<'a> {
    /// Pure transport(-diffusion).
    None,
    /// `u_i += sqrt(eps) * sum_k g_k(x_i, u_i) dbeta_k`.
    Stochastic {
        noise: &'a NoiseModel,
        path: &'a WienerPath,
        sqrt_eps: f64,
    },
    /// The moderate-deviation controlled equation around state 1:
    /// `u_i += sum_k g_k(x_i, 1 + mu u_i) (dbeta_k / lambda + hdot_k dt)`.
    Controlled {
        noise: &'a NoiseModel,
        path: &'a WienerPath,
        inv_lambda: f64,
        mu: f64,
        control: &'a Control,
    },
}

impl Forcing<'_> {
    fn noise(&self) -> Option<&NoiseModel> {
        match self {
            Forcing::None => None,
            Forcing::Stochastic { noise, .. } | Forcing::Controlled { noise, .. } => Some(noise),
        }
    }

    fn path(&self) -> Option<&WienerPath> {
        match self {
            Forcing::None => None,
            Forcing::Stochastic { path, .. } | Forcing::Controlled { path, .. } => Some(path),
        }
    }
}

/// Shared Lie-splitting driver: finite-volume transport, then explicit
/// diffusion when `eta > 0`, then the Euler-Maruyama forcing sub-step, with
/// the noise coefficient frozen at the state entering the sub-step. The time
/// grid is fixed a priori; each step re-checks the realized CFL number,
/// finiteness, and the blowup guard.
pub(crate) fn evolve(
    u0: &Field,
    flux: &FluxModel,
    cfg: &SolverConfig,
    time: TimeGrid,
    forcing: Forcing<'_>,
    meta: TrajectoryMeta,
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    u0.check_finite()?;
    let grid = u0.grid();
    let n = grid.n_cells();
    let dx = grid.dx();
    let dt = time.dt;
    let n_steps = time.n_steps;

    if let Some(path) = forcing.path() {
        if path.n_steps() != n_steps || path.dt() != dt {
            return Err(SolverError::PathMismatch(
                "path grid does not match the solver time grid",
            ));
        }
        let noise = forcing.noise().expect("forcing carries noise");
        if path.n_modes() != noise.n_modes() {
            return Err(SolverError::PathMismatch(
                "path mode count does not match the noise model",
            ));
        }
    }
    if cfg.viscosity > 0.0 && cfg.viscosity * dt / (dx * dx) > DIFFUSION_NUMBER * (1.0 + 1e-9) {
        return Err(SolverError::InvalidConfig(
            "time grid violates the explicit diffusion bound",
        ));
    }
    if let Forcing::Controlled { control, .. } = &forcing {
        if (control.t_end() - time.t_end()).abs() > 1e-9 * time.t_end() {
            return Err(SolverError::PathMismatch(
                "control horizon does not match the solver horizon",
            ));
        }
    }

    let kernel = FluxKernel::new(flux, cfg.scheme, dx / dt);
    let r = dt / dx;
    let nu_r = cfg.viscosity * dt / (dx * dx);

    let basis: Option<BasisTable> = forcing.noise().map(|noise| noise.basis_table(grid));
    let n_modes = forcing.noise().map_or(0, NoiseModel::n_modes);

    let mut u = u0.values().to_vec();
    let mut fluxes = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut kick = vec![0.0; n];
    let mut coeffs = vec![0.0; n_modes];

    let capacity = n_steps / cfg.output_stride + 2;
    let mut times = Vec::with_capacity(capacity);
    let mut fields = Vec::with_capacity(capacity);
    times.push(0.0);
    fields.push(u0.clone());

    for step in 0..n_steps {
        // Stability and sanity sweep on the current state.
        let mut max_speed = 0.0_f64;
        for (cell, &v) in u.iter().enumerate() {
            if !v.is_finite() {
                return Err(SolverError::NonFiniteState { step, cell });
            }
            if v.abs() > cfg.blowup_guard {
                return Err(SolverError::Blowup {
                    step,
                    magnitude: v.abs(),
                });
            }
            max_speed = max_speed.max(flux.derivative(v).abs());
        }
        if dt * max_speed / dx > cfg.cfl * (1.0 + 1e-9) {
            return Err(SolverError::CflViolation {
                step,
                speed: max_speed,
                required: if max_speed > 0.0 {
                    cfg.cfl * dx / max_speed
                } else {
                    f64::INFINITY
                },
            });
        }

        flux_step(&mut u, &mut fluxes, &kernel, r);
        if nu_r > 0.0 {
            diffusion_step(&mut u, &mut scratch, nu_r);
        }

        match &forcing {
            Forcing::None => {}
            Forcing::Stochastic {
                noise,
                path,
                sqrt_eps,
            } => {
                if *sqrt_eps != 0.0 && !noise.is_empty() {
                    let incs = path.increments_at(step);
                    let gammas = noise.gammas();
                    for (k, slot) in coeffs.iter_mut().enumerate() {
                        *slot = gammas[k] * sqrt_eps * incs[k];
                    }
                    accumulate_kick(&mut kick, basis.as_ref().expect("basis"), &coeffs);
                    apply_kick(&mut u, &kick, noise.state_factor(), 1.0, 0.0);
                }
            }
            Forcing::Controlled {
                noise,
                path,
                inv_lambda,
                mu,
                control,
            } => {
                if !noise.is_empty() {
                    let incs = path.increments_at(step);
                    let gammas = noise.gammas();
                    // Midpoint lookup keeps commensurate control grids away
                    // from cell-boundary rounding.
                    let t_mid = (step as f64 + 0.5) * dt;
                    for (k, slot) in coeffs.iter_mut().enumerate() {
                        *slot =
                            gammas[k] * (inv_lambda * incs[k] + dt * control.value_at(t_mid, k));
                    }
                    accumulate_kick(&mut kick, basis.as_ref().expect("basis"), &coeffs);
                    apply_kick(&mut u, &kick, noise.state_factor(), *mu, 1.0);
                }
            }
        }

        let done = step + 1 == n_steps;
        if done || (step + 1) % cfg.output_stride == 0 {
            let t = if done {
                time.t_end()
            } else {
                (step + 1) as f64 * dt
            };
            times.push(t);
            fields.push(Field::from_values(grid, u.clone()).expect("length preserved"));
        }
    }

    Trajectory::new(times, fields, meta)
}

/// `kick_i = sum_k phi_k(x_i) coeff_k`, mode-major accumulation.
fn accumulate_kick(kick: &mut [f64], basis: &BasisTable, coeffs: &[f64]) {
    kick.fill(0.0);
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (slot, &b) in kick.iter_mut().zip(basis.row(k)) {
            *slot += b * c;
        }
    }
}

/// `u_i += sigma(offset + mu * u_i) * kick_i`; `offset = 0, mu = 1` evaluates
/// sigma at the state itself, `offset = 1` at `1 + mu u` (controlled form).
fn apply_kick(u: &mut [f64], kick: &[f64], factor: StateFactor, mu: f64, offset: f64) {
    match factor {
        StateFactor::Additive => {
            for (v, &k) in u.iter_mut().zip(kick) {
                *v += k;
            }
        }
        StateFactor::Linear => {
            for (v, &k) in u.iter_mut().zip(kick) {
                let state = offset + mu * *v;
                *v += state * k;
            }
        }
    }
}
