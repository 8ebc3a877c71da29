use alloc::format;
use alloc::vec::Vec;

use super::slope::{fit_loglog_slope, SamplePoint, SlopeFit};
use super::AnalysisError;
use crate::limits::{solve_linear_spde, SpectralPropagator};
use crate::model::{Field, FluxModel, NoiseModel, StreamKey, TorusGrid, WienerPath};
use crate::runner::{column, reduce_mean_stderr, ReplicateRunner};
use crate::solvers::{derive_fluctuation, solve_spde, SolverConfig, TimeGrid};

pub(crate) const EXP_SCALING: u32 = 1;
pub(crate) const EXP_CLT: u32 = 2;
pub(crate) const EXP_VISCOUS_GAP: u32 = 3;
pub(crate) const EXP_H_GAP: u32 = 4;

/// Shared experiment inputs: the model objects, base solver settings, the
/// master seed, and the replicate executor.
pub struct ExperimentEnv<'a> {
    pub grid: TorusGrid,
    pub flux: &'a FluxModel,
    pub noise: &'a NoiseModel,
    pub cfg: &'a SolverConfig,
    pub seed: u64,
    pub runner: &'a dyn ReplicateRunner,
}

impl ExperimentEnv<'_> {
    fn key(&self, experiment: u32, replicate: u32) -> StreamKey {
        StreamKey::new(self.seed, experiment, replicate)
    }

    /// Transport speed of the linearized equation, `a(1)`.
    fn limit_speed(&self) -> f64 {
        self.flux.derivative(1.0)
    }
}

fn check_eps_grid(eps_grid: &[f64]) -> Result<(), AnalysisError> {
    if eps_grid.is_empty() {
        return Err(AnalysisError::InvalidParameter("empty eps grid"));
    }
    for &e in eps_grid {
        if !(e > 0.0 && e <= 1.0) {
            return Err(AnalysisError::InvalidParameter(
                "eps grid entries must lie in (0, 1]",
            ));
        }
    }
    Ok(())
}

/// Moment-scaling study: per `eps`, the Monte Carlo estimate of
/// `E int_0^T ||u^{eps,eta}(t) - 1||_q^q dt`, which the small-noise moment
/// bound predicts to scale like `eps^{q/2}`; the log-log slope is fitted
/// with that target. Replicates share Brownian paths across `eps` (common
/// random numbers), which only sharpens the slope.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScalingReport {
    pub q: f64,
    pub eta: f64,
    pub replicates: u32,
    pub points: Vec<SamplePoint>,
    pub fit: Option<SlopeFit>,
    /// Set when every estimate is zero (e.g. an empty noise family).
    pub degenerate: bool,
}

pub fn run_scaling_experiment(
    env: &ExperimentEnv<'_>,
    q: f64,
    eps_grid: &[f64],
    eta: f64,
    replicates: u32,
) -> Result<ScalingReport, AnalysisError> {
    if !(q >= 2.0) {
        return Err(AnalysisError::InvalidParameter("q must be >= 2"));
    }
    check_eps_grid(eps_grid)?;
    let cfg = env.cfg.clone().with_viscosity(eta);
    let u0 = Field::constant(env.grid, 1.0);
    let time = crate::solvers::plan_time_grid(&u0, env.flux, &cfg)?;
    let n_modes = env.noise.n_modes();

    let stats = env.runner.run(replicates, &|rep| {
        let path = WienerPath::generate(env.key(EXP_SCALING, rep), n_modes, time.n_steps, time.dt)
            .map_err(|e| format!("path: {e}"))?;
        let mut row = Vec::with_capacity(eps_grid.len());
        for &eps in eps_grid {
            let traj = solve_spde(&u0, env.flux, env.noise, &path, eps, &cfg)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let stat = traj
                .time_integral_lp_pow(q, 1.0)
                .map_err(|e| format!("eps={eps}: {e}"))?;
            row.push(stat);
        }
        Ok(row)
    })?;

    let points: Vec<SamplePoint> = eps_grid
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let red = reduce_mean_stderr(&column(&stats, i));
            SamplePoint {
                eps,
                estimate: red.mean,
                stderr: red.stderr,
            }
        })
        .collect();
    let degenerate = points.iter().any(|p| !(p.estimate > 0.0));
    let fit = if degenerate {
        None
    } else {
        Some(fit_loglog_slope(&points)?)
    };
    Ok(ScalingReport {
        q,
        eta,
        replicates,
        points,
        fit,
        degenerate,
    })
}

/// Central-limit-theorem gap: per `eps`, the coupled-path estimate of
/// `E || (u^eps - 1)/sqrt(eps) - v ||_{L1 L1}` where `v` is the exact
/// spectral solution of the linear limit equation driven by the same
/// increments. The limit statement gives convergence to zero with no rate,
/// so acceptance is trend-based.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CltReport {
    pub replicates: u32,
    pub points: Vec<SamplePoint>,
    /// Reference scale: `E || v ||_{L1 L1}` with stderr, for judging decay.
    pub limit_scale: SamplePoint,
}

pub fn run_clt_experiment(
    env: &ExperimentEnv<'_>,
    eps_grid: &[f64],
    replicates: u32,
) -> Result<CltReport, AnalysisError> {
    check_eps_grid(eps_grid)?;
    let cfg = env.cfg.clone().with_viscosity(0.0);
    let u0 = Field::constant(env.grid, 1.0);
    let time = crate::solvers::plan_time_grid(&u0, env.flux, &cfg)?;
    let frozen = env.noise.frozen_at_one();
    let prop = SpectralPropagator::new(env.limit_speed(), 0.0)?;
    let n_modes = env.noise.n_modes();

    let stats = env.runner.run(replicates, &|rep| {
        let path = WienerPath::generate(env.key(EXP_CLT, rep), n_modes, time.n_steps, time.dt)
            .map_err(|e| format!("path: {e}"))?;
        let linear = solve_linear_spde(&frozen, &prop, env.grid, &path, cfg.output_stride)
            .map_err(|e| e.annotate("linear limit"))?;
        let mut row = Vec::with_capacity(eps_grid.len() + 1);
        for &eps in eps_grid {
            let traj = solve_spde(&u0, env.flux, env.noise, &path, eps, &cfg)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let v = derive_fluctuation(&traj, eps, None)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let gap = v
                .difference(&linear)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?
                .l1_l1_norm()
                .map_err(|e| format!("eps={eps}: {e}"))?;
            row.push(gap);
        }
        row.push(linear.l1_l1_norm().map_err(|e| format!("limit: {e}"))?);
        Ok(row)
    })?;

    let points = eps_grid
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let red = reduce_mean_stderr(&column(&stats, i));
            SamplePoint {
                eps,
                estimate: red.mean,
                stderr: red.stderr,
            }
        })
        .collect();
    let scale = reduce_mean_stderr(&column(&stats, eps_grid.len()));
    Ok(CltReport {
        replicates,
        points,
        limit_scale: SamplePoint {
            eps: 0.0,
            estimate: scale.mean,
            stderr: scale.stderr,
        },
    })
}

/// One cell of the viscous-gap table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GapCell {
    pub eps: f64,
    pub eta: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Viscous-gap study. Nonlinear side: coupled-path
/// `E || v^eps - v^{eps,eta} ||_{L1 L1}` where the `eta = 0` process is
/// represented by an inviscid run on a spatially refined grid (the scheme
/// itself carries numerical viscosity, so the refined run is the surrogate;
/// with `refine = 1` and `eta = 0` the gap vanishes identically). Linear
/// side: the exact spectral processes, `E || v_eta - v_0 ||_{L1 L1}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ViscousGapReport {
    pub replicates: u32,
    pub refine: usize,
    pub nonlinear: Vec<GapCell>,
    /// Per eta: supremum over the eps grid of the nonlinear mean gap.
    pub sup_nonlinear: Vec<(f64, f64)>,
    /// Per eta: linear gap mean and stderr (eps-independent).
    pub linear: Vec<GapCell>,
}

pub fn run_viscous_gap(
    env: &ExperimentEnv<'_>,
    eps_grid: &[f64],
    eta_grid: &[f64],
    replicates: u32,
    refine: usize,
) -> Result<ViscousGapReport, AnalysisError> {
    check_eps_grid(eps_grid)?;
    if eta_grid.is_empty() || refine == 0 {
        return Err(AnalysisError::InvalidParameter(
            "need a nonempty eta grid and refine >= 1",
        ));
    }
    for &eta in eta_grid {
        if !(eta >= 0.0) {
            return Err(AnalysisError::InvalidParameter("eta must be >= 0"));
        }
    }
    let fine_grid = TorusGrid::new(env.grid.n_cells() * refine)?;
    let u0 = Field::constant(env.grid, 1.0);
    let u0_fine = Field::constant(fine_grid, 1.0);

    // Master step: stable for the refined inviscid run and for the stiffest
    // coarse viscous run.
    let eta_max = eta_grid.iter().fold(0.0_f64, |m, &e| m.max(e));
    let cfg_ref = env.cfg.clone().with_viscosity(0.0);
    let cfg_stiff = env.cfg.clone().with_viscosity(eta_max);
    let bound_fine = {
        let (lo, hi) = (1.0 - env.cfg.range_margin, 1.0 + env.cfg.range_margin);
        cfg_ref.dt_bound(env.flux, lo, hi, fine_grid)
    };
    let bound_coarse = {
        let (lo, hi) = (1.0 - env.cfg.range_margin, 1.0 + env.cfg.range_margin);
        cfg_stiff.dt_bound(env.flux, lo, hi, env.grid)
    };
    let time = TimeGrid::fit(
        env.cfg.t_end,
        bound_fine.min(bound_coarse),
        env.cfg.dt_floor,
    )?;

    let prop0 = SpectralPropagator::new(env.limit_speed(), 0.0)?;
    let frozen = env.noise.frozen_at_one();
    let n_modes = env.noise.n_modes();
    let n_eta = eta_grid.len();

    let stats = env.runner.run(replicates, &|rep| {
        let path = WienerPath::generate(
            env.key(EXP_VISCOUS_GAP, rep),
            n_modes,
            time.n_steps,
            time.dt,
        )
        .map_err(|e| format!("path: {e}"))?;
        let mut row = Vec::with_capacity(eps_grid.len() * n_eta + n_eta);
        for &eps in eps_grid {
            let reference = solve_spde(&u0_fine, env.flux, env.noise, &path, eps, &cfg_ref)
                .map_err(|e| e.annotate(&format!("reference eps={eps}")))?;
            let reference_v = derive_fluctuation(&reference, eps, None)
                .map_err(|e| e.annotate("reference"))?
                .restrict_to(env.grid)
                .map_err(|e| e.annotate("restriction"))?;
            for &eta in eta_grid {
                let cfg_eta = env.cfg.clone().with_viscosity(eta);
                let traj = solve_spde(&u0, env.flux, env.noise, &path, eps, &cfg_eta)
                    .map_err(|e| e.annotate(&format!("eps={eps} eta={eta}")))?;
                let v = derive_fluctuation(&traj, eps, None)
                    .map_err(|e| e.annotate(&format!("eps={eps} eta={eta}")))?;
                let gap = reference_v
                    .difference(&v)
                    .map_err(|e| e.annotate(&format!("eps={eps} eta={eta}")))?
                    .l1_l1_norm()
                    .map_err(|e| format!("eps={eps} eta={eta}: {e}"))?;
                row.push(gap);
            }
        }
        let lin0 = solve_linear_spde(&frozen, &prop0, env.grid, &path, env.cfg.output_stride)
            .map_err(|e| e.annotate("linear eta=0"))?;
        for &eta in eta_grid {
            let prop = SpectralPropagator::new(env.limit_speed(), eta)
                .map_err(|e| e.annotate("linear propagator"))?;
            let lin = solve_linear_spde(&frozen, &prop, env.grid, &path, env.cfg.output_stride)
                .map_err(|e| e.annotate(&format!("linear eta={eta}")))?;
            let gap = lin
                .difference(&lin0)
                .map_err(|e| e.annotate(&format!("linear eta={eta}")))?
                .l1_l1_norm()
                .map_err(|e| format!("linear eta={eta}: {e}"))?;
            row.push(gap);
        }
        Ok(row)
    })?;

    let mut nonlinear = Vec::with_capacity(eps_grid.len() * n_eta);
    for (ei, &eps) in eps_grid.iter().enumerate() {
        for (hi, &eta) in eta_grid.iter().enumerate() {
            let red = reduce_mean_stderr(&column(&stats, ei * n_eta + hi));
            nonlinear.push(GapCell {
                eps,
                eta,
                mean: red.mean,
                stderr: red.stderr,
            });
        }
    }
    let sup_nonlinear = eta_grid
        .iter()
        .map(|&eta| {
            let sup = nonlinear
                .iter()
                .filter(|c| c.eta == eta)
                .fold(0.0_f64, |m, c| m.max(c.mean));
            (eta, sup)
        })
        .collect();
    let linear = eta_grid
        .iter()
        .enumerate()
        .map(|(hi, &eta)| {
            let red = reduce_mean_stderr(&column(&stats, eps_grid.len() * n_eta + hi));
            GapCell {
                eps: 0.0,
                eta,
                mean: red.mean,
                stderr: red.stderr,
            }
        })
        .collect();
    Ok(ViscousGapReport {
        replicates,
        refine,
        nonlinear,
        sup_nonlinear,
        linear,
    })
}

/// One `eps` entry of the fixed-viscosity gap study.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HGapPoint {
    pub eps: f64,
    /// `sup_t E || v^{eps,eta}(t) - v_lin(t) ||_{L2}^2`.
    pub sup_gap: f64,
    /// Standard error of the mean at the achieving output time.
    pub stderr: f64,
    pub argmax_t: f64,
}

/// Fixed `eta > 0` comparison of the rescaled nonlinear process against the
/// linear equation *discretized by the same scheme on the same grid and
/// path* (linear flux `a(1) xi`, noise frozen at 1, unit noise coefficient).
/// Discretizing both sides removes the eps-independent spatial-symbol floor,
/// so the squared gap scales like `eps`, the rate the fixed-viscosity
/// estimate provides. The exact spectral reference stays in use where the
/// comparison is against the continuum object.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HGapReport {
    pub eta: f64,
    pub replicates: u32,
    pub points: Vec<HGapPoint>,
    pub fit: Option<SlopeFit>,
}

pub fn run_h_gap(
    env: &ExperimentEnv<'_>,
    eta: f64,
    eps_grid: &[f64],
    replicates: u32,
) -> Result<HGapReport, AnalysisError> {
    check_eps_grid(eps_grid)?;
    if !(eta > 0.0) {
        return Err(AnalysisError::InvalidParameter("h-gap needs eta > 0"));
    }
    let cfg = env.cfg.clone().with_viscosity(eta);
    let u0 = Field::constant(env.grid, 1.0);
    let z0 = Field::zeros(env.grid);
    let linear_flux = FluxModel::linear(env.limit_speed());
    let frozen = env.noise.frozen_at_one();

    let bound_nonlinear = {
        let (lo, hi) = (1.0 - cfg.range_margin, 1.0 + cfg.range_margin);
        cfg.dt_bound(env.flux, lo, hi, env.grid)
    };
    let bound_linear = {
        let (lo, hi) = (-cfg.range_margin, cfg.range_margin);
        cfg.dt_bound(&linear_flux, lo, hi, env.grid)
    };
    let time = TimeGrid::fit(
        cfg.t_end,
        bound_nonlinear.min(bound_linear),
        cfg.dt_floor,
    )?;
    let n_modes = env.noise.n_modes();

    let stats = env.runner.run(replicates, &|rep| {
        let path = WienerPath::generate(env.key(EXP_H_GAP, rep), n_modes, time.n_steps, time.dt)
            .map_err(|e| format!("path: {e}"))?;
        let reference = solve_spde(&z0, &linear_flux, &frozen, &path, 1.0, &cfg)
            .map_err(|e| e.annotate("linear reference"))?;
        let mut row = Vec::new();
        for &eps in eps_grid {
            let traj = solve_spde(&u0, env.flux, env.noise, &path, eps, &cfg)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let v = derive_fluctuation(&traj, eps, None)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let diff = v
                .difference(&reference)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            for j in 0..diff.len() {
                let norm = diff
                    .l2_sq_at(j, 0.0)
                    .map_err(|e| format!("eps={eps}: {e}"))?;
                row.push(norm);
            }
        }
        Ok(row)
    })?;

    let n_times = stats[0].len() / eps_grid.len();
    let mut points = Vec::with_capacity(eps_grid.len());
    let mut fit_points = Vec::with_capacity(eps_grid.len());
    for (ei, &eps) in eps_grid.iter().enumerate() {
        let mut best = (0usize, 0.0_f64, 0.0_f64);
        for j in 0..n_times {
            let red = reduce_mean_stderr(&column(&stats, ei * n_times + j));
            if red.mean > best.1 {
                best = (j, red.mean, red.stderr);
            }
        }
        // Output time index -> physical time via the shared stride pattern.
        let argmax_t = if best.0 == 0 {
            0.0
        } else {
            let step = best.0 * env.cfg.output_stride;
            (step.min(time.n_steps)) as f64 * time.dt
        };
        points.push(HGapPoint {
            eps,
            sup_gap: best.1,
            stderr: best.2,
            argmax_t,
        });
        fit_points.push(SamplePoint {
            eps,
            estimate: best.1,
            stderr: best.2,
        });
    }
    let fit = if points.iter().all(|p| p.sup_gap > 0.0) && eps_grid.len() >= 3 {
        Some(fit_loglog_slope(&fit_points)?)
    } else {
        None
    };
    Ok(HGapReport {
        eta,
        replicates,
        points,
        fit,
    })
}
