use alloc::format;
use alloc::vec::Vec;

use super::{EventSpec, MdpError};
use crate::limits::{solve_skeleton, SpectralPropagator};
use crate::math;
use crate::model::{Control, DeviationScale, FluxModel, NoiseModel, StreamKey, TorusGrid, WienerPath};
use crate::runner::{column, reduce_mean_stderr, ReplicateRunner};
use crate::solvers::{solve_controlled_spde, SolverConfig, TimeGrid};

pub(crate) const EXP_CONDITION_A: u32 = 5;
pub(crate) const EXP_MDP_PROB: u32 = 6;

/// Continuity of the skeleton map along weakly-null perturbations: one row
/// per oscillation index `m`, carrying `|| X_{h + pert_m} - X_h ||_{L1 L1}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionBReport {
    pub rows: Vec<(u32, f64)>,
    /// Gap for the constant-in-time perturbation of the same amplitude: not
    /// weakly null, so the gap must not vanish.
    pub constant_case: f64,
    pub amplitude: f64,
    pub mode: usize,
    pub ball: f64,
}

/// Perturb mode `pert_mode` of `h` by `amplitude * sin(2 pi m t)` for each
/// oscillation index `m`, all inside `S_N` (`2 * energy <= ball`); the gap to
/// the base skeleton solution should fall off as the perturbation goes
/// weakly to zero.
#[allow(clippy::too_many_arguments)]
pub fn run_condition_b(
    noise: &NoiseModel,
    speed: f64,
    grid: TorusGrid,
    h: &Control,
    ball: f64,
    pert_mode: usize,
    amplitude: f64,
    m_list: &[u32],
    time: TimeGrid,
    stride: usize,
) -> Result<ConditionBReport, MdpError> {
    if m_list.is_empty() {
        return Err(MdpError::TargetGrid("need at least one oscillation index"));
    }
    let prop = SpectralPropagator::new(speed, 0.0)?;
    if !h.in_energy_ball(ball) {
        return Err(MdpError::LeavesBall {
            energy2: h.cm_norm_sq(),
            ball,
        });
    }
    let base = solve_skeleton(noise, &prop, grid, h, time, stride)?;
    let t_end = h.t_end();

    let perturbed_gap = |profile: &dyn Fn(f64) -> f64| -> Result<f64, MdpError> {
        let pert = Control::zero(t_end, h.n_steps(), h.n_modes())?
            .with_mode(pert_mode, profile)?;
        let hm = h.add(&pert)?;
        if !hm.in_energy_ball(ball) {
            return Err(MdpError::LeavesBall {
                energy2: hm.cm_norm_sq(),
                ball,
            });
        }
        let traj = solve_skeleton(noise, &prop, grid, &hm, time, stride)?;
        Ok(traj.difference(&base)?.l1_l1_norm()?)
    };

    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let gap = perturbed_gap(&|t: f64| amplitude * math::sin(math::TAU * m as f64 * t))?;
        rows.push((m, gap));
    }
    let constant_case = perturbed_gap(&|_| amplitude)?;
    Ok(ConditionBReport {
        rows,
        constant_case,
        amplitude,
        mode: pert_mode,
        ball,
    })
}

/// One `eps` row of the controlled-convergence experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionARow {
    pub eps: f64,
    /// Empirical `P(|| X^eps_h - X_h ||_{L1 L1} > delta)`.
    pub probability: f64,
    pub prob_stderr: f64,
    pub mean_gap: f64,
    pub gap_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionAReport {
    pub delta: f64,
    pub replicates: u32,
    pub rows: Vec<ConditionARow>,
}

/// Convergence of the controlled equation to the skeleton: per `eps`, the
/// empirical probability that the coupled `L^1 L^1` gap between
/// `solve_controlled_spde` under `h` and the skeleton solution exceeds
/// `delta`. The deterministic family `h^eps = h` is used throughout.
#[allow(clippy::too_many_arguments)]
pub fn run_condition_a(
    grid: TorusGrid,
    flux: &FluxModel,
    noise: &NoiseModel,
    scale: &DeviationScale,
    cfg: &SolverConfig,
    h: &Control,
    eps_grid: &[f64],
    delta: f64,
    replicates: u32,
    seed: u64,
    runner: &dyn ReplicateRunner,
) -> Result<ConditionAReport, MdpError> {
    if eps_grid.is_empty() {
        return Err(MdpError::TargetGrid("empty eps grid"));
    }
    if !(delta > 0.0) {
        return Err(MdpError::TargetGrid("delta must be positive"));
    }
    let cfg = cfg.clone().with_viscosity(0.0);
    let time = controlled_time_grid(&cfg, flux, grid)?;
    let speed = flux.derivative(1.0);
    let prop = SpectralPropagator::new(speed, 0.0)?;
    let skeleton = solve_skeleton(noise, &prop, grid, h, time, cfg.output_stride)?;
    let n_modes = noise.n_modes();

    let stats = runner.run(replicates, &|rep| {
        let key = StreamKey::new(seed, EXP_CONDITION_A, rep);
        let path = WienerPath::generate(key, n_modes, time.n_steps, time.dt)
            .map_err(|e| format!("path: {e}"))?;
        let mut row = Vec::with_capacity(eps_grid.len());
        for &eps in eps_grid {
            let traj = solve_controlled_spde(grid, flux, noise, &path, eps, scale, h, &cfg)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?;
            let gap = traj
                .difference(&skeleton)
                .map_err(|e| e.annotate(&format!("eps={eps}")))?
                .l1_l1_norm()
                .map_err(|e| format!("eps={eps}: {e}"))?;
            row.push(gap);
        }
        Ok(row)
    })?;

    let rows = eps_grid
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let gaps = column(&stats, i);
            let hits: Vec<f64> = gaps
                .iter()
                .map(|&gap| if gap > delta { 1.0 } else { 0.0 })
                .collect();
            let prob = reduce_mean_stderr(&hits);
            let gap = reduce_mean_stderr(&gaps);
            ConditionARow {
                eps,
                probability: prob.mean,
                prob_stderr: prob.stderr,
                mean_gap: gap.mean,
                gap_stderr: gap.stderr,
            }
        })
        .collect();
    Ok(ConditionAReport {
        delta,
        replicates,
        rows,
    })
}

/// A-priori step bound for the controlled equation: the rescaled flux speed
/// satisfies `|Psi'(xi)| = |a(1 + mu xi)| <= max |a|` over the widened range
/// for every `eps` in `(0, 1)`, so one grid serves the whole sweep.
fn controlled_time_grid(
    cfg: &SolverConfig,
    flux: &FluxModel,
    grid: TorusGrid,
) -> Result<TimeGrid, MdpError> {
    cfg.validate()?;
    let bound = cfg.dt_bound(flux, 1.0 - cfg.range_margin, 1.0 + cfg.range_margin, grid);
    Ok(TimeGrid::fit(cfg.t_end, bound, cfg.dt_floor)?)
}

/// One `eps` row of the rare-event probability table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MdpProbRow {
    pub eps: f64,
    pub lambda_sq: f64,
    pub p_plain: f64,
    pub p_plain_stderr: f64,
    /// `-log(P) / lambda^2`; when plain MC records zero hits this is the
    /// one-sided bound `log(replicates) / lambda^2` and the flag is set.
    pub norm_plain: f64,
    pub plain_is_bound: bool,
    pub p_shifted: Option<f64>,
    pub p_shifted_stderr: Option<f64>,
    pub norm_shifted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MdpProbReport {
    pub threshold: f64,
    pub replicates: u32,
    /// Least-action rate of the event, when the caller solved for it.
    pub event_rate: Option<f64>,
    pub rows: Vec<MdpProbRow>,
}

/// Estimate `P(X^eps in F)` for a norm super-level event, plain Monte Carlo
/// and (optionally) importance-sampled under the Cameron-Martin shift
/// `lambda(eps) * hdot*`. The shifted runs reuse the controlled solver with
/// control `hdot*` and reweight by
/// `exp(-lambda * sum hdot* dbeta - lambda^2/2 * sum hdot*^2 dt)`,
/// which is the exact discrete change of measure for the increment vector.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mdp_probability(
    grid: TorusGrid,
    flux: &FluxModel,
    noise: &NoiseModel,
    scale: &DeviationScale,
    cfg: &SolverConfig,
    event: &EventSpec,
    eps_grid: &[f64],
    replicates: u32,
    shift: Option<&Control>,
    event_rate: Option<f64>,
    seed: u64,
    runner: &dyn ReplicateRunner,
) -> Result<MdpProbReport, MdpError> {
    event.validate()?;
    if eps_grid.is_empty() {
        return Err(MdpError::TargetGrid("empty eps grid"));
    }
    let cfg = cfg.clone().with_viscosity(0.0);
    let time = controlled_time_grid(&cfg, flux, grid)?;
    let zero = Control::zero(cfg.t_end, time.n_steps, noise.n_modes())?;
    let n_modes = noise.n_modes();

    let stats = runner.run(replicates, &|rep| {
        let key = StreamKey::new(seed, EXP_MDP_PROB, rep);
        let path = WienerPath::generate(key, n_modes, time.n_steps, time.dt)
            .map_err(|e| format!("path: {e}"))?;
        let mut row = Vec::new();
        for &eps in eps_grid {
            let lambda = scale.lambda(eps).map_err(|e| format!("eps={eps}: {e}"))?;
            let plain = solve_controlled_spde(grid, flux, noise, &path, eps, scale, &zero, &cfg)
                .map_err(|e| e.annotate(&format!("plain eps={eps}")))?;
            let hit = event
                .is_hit(&plain)
                .map_err(|e| format!("plain eps={eps}: {e}"))?;
            row.push(if hit { 1.0 } else { 0.0 });
            if let Some(hstar) = shift {
                let shifted =
                    solve_controlled_spde(grid, flux, noise, &path, eps, scale, hstar, &cfg)
                        .map_err(|e| e.annotate(&format!("shifted eps={eps}")))?;
                let hit = event
                    .is_hit(&shifted)
                    .map_err(|e| format!("shifted eps={eps}: {e}"))?;
                let weight = if hit {
                    girsanov_weight(hstar, &path, lambda)
                } else {
                    0.0
                };
                row.push(weight);
            }
        }
        Ok(row)
    })?;

    let stride = if shift.is_some() { 2 } else { 1 };
    let rows = eps_grid
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let lambda = scale.lambda(eps).expect("validated above");
            let lambda_sq = lambda * lambda;
            let plain = reduce_mean_stderr(&column(&stats, i * stride));
            let (norm_plain, plain_is_bound) = if plain.mean > 0.0 {
                (-math::ln(plain.mean) / lambda_sq, false)
            } else {
                (math::ln(replicates as f64) / lambda_sq, true)
            };
            let (p_shifted, p_shifted_stderr, norm_shifted) = if shift.is_some() {
                let is = reduce_mean_stderr(&column(&stats, i * stride + 1));
                let norm = if is.mean > 0.0 {
                    Some(-math::ln(is.mean) / lambda_sq)
                } else {
                    None
                };
                (Some(is.mean), Some(is.stderr), norm)
            } else {
                (None, None, None)
            };
            MdpProbRow {
                eps,
                lambda_sq,
                p_plain: plain.mean,
                p_plain_stderr: plain.stderr,
                norm_plain,
                plain_is_bound,
                p_shifted,
                p_shifted_stderr,
                norm_shifted,
            }
        })
        .collect();
    Ok(MdpProbReport {
        threshold: event.threshold,
        replicates,
        event_rate,
        rows,
    })
}

/// `exp(-lambda * S1 - lambda^2/2 * S2)` with `S1 = sum_{j,k} hdot dbeta`
/// and `S2 = sum_{j,k} hdot^2 dt`, both sampled exactly as the solver does
/// (step midpoints), so the reweighting inverts the simulated shift exactly.
fn girsanov_weight(hstar: &Control, path: &WienerPath, lambda: f64) -> f64 {
    let dt = path.dt();
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for j in 0..path.n_steps() {
        let t_mid = (j as f64 + 0.5) * dt;
        for k_idx in 0..path.n_modes() {
            let v = hstar.value_at(t_mid, k_idx);
            if v != 0.0 {
                s1 += v * path.increment(j, k_idx);
                s2 += v * v * dt;
            }
        }
    }
    math::exp(-lambda * s1 - 0.5 * lambda * lambda * s2)
}
