use alloc::vec;
use alloc::vec::Vec;

use super::{EventSpec, MdpError};
use crate::limits::{project_band, BandCoeffs, ConvolutionEngine, SpectralPropagator};
use crate::math;
use crate::model::{Control, Field, NoiseModel, TorusGrid};
use crate::solvers::{TimeGrid, Trajectory, TrajectoryMeta};

/// What the least-norm control must reproduce: a whole trajectory sampled on
/// the problem's time grid (`t_1 .. t_M`; the `t_0 = 0` sample is identically
/// zero and carries no constraint) or the terminal state alone.
#[derive(Debug, Clone)]
pub enum RateTarget {
    Trajectory(Vec<Field>),
    Terminal(Field),
}

impl RateTarget {
    /// Extract a trajectory target, checking it sits on the problem grid.
    pub fn from_trajectory(traj: &Trajectory, problem: &RateProblem<'_>) -> Result<Self, MdpError> {
        let time = problem.time;
        if traj.len() != time.n_steps + 1 {
            return Err(MdpError::TargetGrid(
                "trajectory must be sampled at every step of the rate grid",
            ));
        }
        for (j, &t) in traj.times().iter().enumerate() {
            let want = if j == time.n_steps {
                time.t_end()
            } else {
                j as f64 * time.dt
            };
            if (t - want).abs() > 1e-12 * (1.0 + want) {
                return Err(MdpError::TargetGrid("trajectory times do not match the rate grid"));
            }
        }
        Ok(RateTarget::Trajectory(traj.fields()[1..].to_vec()))
    }
}

/// Outcome of the least-norm solve: the rate value `I = energy(hdot*)`, the
/// minimizing control, and the residual diagnostics. `infinite` marks the
/// `inf over the empty set` verdict (target outside the reachable span).
#[derive(Debug, Clone)]
pub struct RateResult {
    pub value: f64,
    pub infinite: bool,
    pub control: Control,
    /// `|| K hdot - g ||` in the weighted trajectory (or terminal) norm.
    pub residual: f64,
    pub relative_residual: f64,
    pub target_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rate of a norm super-level event together with its minimizer.
#[derive(Debug, Clone)]
pub struct EventRate {
    pub value: f64,
    pub infinite: bool,
    pub control: Control,
    /// The boundary minimizer `g*` as trajectory samples at `t_1 .. t_M`.
    pub target: Vec<Field>,
}

/// The quadratic least-action problem `min (1/2) int ||hdot||^2` subject to
/// the skeleton map reproducing a target, discretized on piecewise-constant
/// controls over `M` uniform time cells and the truncated mode family.
///
/// The skeleton map `K` is applied through the shared convolution engine;
/// its adjoint runs the transport backward in time. The least-norm solve is
/// conjugate gradients on the Gram system `K K* w = g` with `hdot* = K* w`,
/// which keeps the minimizer in the range of `K*` by construction. A target
/// with content outside the reachable span stalls the residual, which is
/// declared infeasible (`I = +inf`) per the stall rule below.
pub struct RateProblem<'a> {
    engine: ConvolutionEngine<'a>,
    grid: TorusGrid,
    time: TimeGrid,
    n_modes: usize,
}

/// Residual reduction below 1% over this many iterations is a stall.
const STALL_WINDOW: usize = 50;
const STALL_FACTOR: f64 = 0.99;

impl<'a> RateProblem<'a> {
    /// `speed` is the frozen transport speed `a(1)`; the skeleton equation
    /// carries no viscosity.
    pub fn new(
        noise: &'a NoiseModel,
        speed: f64,
        grid: TorusGrid,
        time: TimeGrid,
    ) -> Result<Self, MdpError> {
        let prop = SpectralPropagator::new(speed, 0.0)?;
        let engine = ConvolutionEngine::new(noise, &prop, grid, time.dt)?;
        Ok(Self {
            engine,
            grid,
            time,
            n_modes: noise.n_modes(),
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    fn steps(&self) -> usize {
        self.time.n_steps
    }

    /// Forward map on raw coefficients: states at `t_1 .. t_M`.
    fn forward_states(&self, hdot: &[f64]) -> Vec<BandCoeffs> {
        let m = self.steps();
        let k_modes = self.n_modes;
        let dt = self.time.dt;
        let mut out = Vec::with_capacity(m);
        let mut state = self.engine.zero_state();
        for j in 0..m {
            self.engine.step(&mut state);
            for k_idx in 0..k_modes {
                self.engine
                    .inject(&mut state, k_idx, hdot[j * k_modes + k_idx] * dt);
            }
            out.push(state.clone());
        }
        out
    }

    /// `K hdot` as flat trajectory values (`M * n_cells`).
    fn forward_flat(&self, hdot: &[f64]) -> Vec<f64> {
        let n = self.n_cells();
        let mut flat = vec![0.0; self.steps() * n];
        for (j, state) in self.forward_states(hdot).iter().enumerate() {
            flat[j * n..(j + 1) * n].copy_from_slice(self.engine.evaluate(state).values());
        }
        flat
    }

    /// `K* g` for a flat trajectory functional: backward sweep
    /// `A_j = g_hat_j + P* A_{j+1}`, `(K* g)_{jk} = dt <line_k, A_j>`.
    fn adjoint_flat(&self, g_flat: &[f64]) -> Result<Vec<f64>, MdpError> {
        let m = self.steps();
        let n = self.n_cells();
        let k_modes = self.n_modes;
        let dt = self.time.dt;
        let m_max = self.engine.m_max();
        let mut out = vec![0.0; m * k_modes];
        let mut acc = BandCoeffs::zeros(m_max);
        let mut buf = vec![0.0; k_modes];
        for j in (0..m).rev() {
            self.engine.step_adjoint(&mut acc);
            let field = Field::from_values(self.grid, g_flat[j * n..(j + 1) * n].to_vec())?;
            let projected = project_band(&field, m_max)?;
            acc.c0 += projected.c0;
            for (a, b) in acc.pairs.iter_mut().zip(&projected.pairs) {
                a[0] += b[0];
                a[1] += b[1];
            }
            self.engine.read_adjoint(&acc, &mut buf);
            for (k_idx, &v) in buf.iter().enumerate() {
                out[j * k_modes + k_idx] = dt * v;
            }
        }
        Ok(out)
    }

    /// Terminal forward map `K_T hdot = X(T)` as field values.
    fn forward_terminal_flat(&self, hdot: &[f64]) -> Vec<f64> {
        let states = self.forward_states(hdot);
        self.engine
            .evaluate(states.last().expect("at least one step"))
            .values()
            .to_vec()
    }

    /// Adjoint of the terminal map: `(K_T* f)_{jk} = dt <line_k, (P*)^{M-1-j} f>`.
    fn adjoint_terminal_flat(&self, f_flat: &[f64]) -> Result<Vec<f64>, MdpError> {
        let m = self.steps();
        let k_modes = self.n_modes;
        let dt = self.time.dt;
        let m_max = self.engine.m_max();
        let field = Field::from_values(self.grid, f_flat.to_vec())?;
        let mut acc = project_band(&field, m_max)?;
        let mut out = vec![0.0; m * k_modes];
        let mut buf = vec![0.0; k_modes];
        for j in (0..m).rev() {
            self.engine.read_adjoint(&acc, &mut buf);
            for (k_idx, &v) in buf.iter().enumerate() {
                out[j * k_modes + k_idx] = dt * v;
            }
            self.engine.step_adjoint(&mut acc);
        }
        Ok(out)
    }

    /// Public forward map: the skeleton trajectory of a control on the
    /// problem grid, including the zero sample at `t = 0`.
    pub fn skeleton_of(&self, control: &Control) -> Result<Trajectory, MdpError> {
        let hdot = self.control_to_flat(control)?;
        let states = self.forward_states(&hdot);
        let mut times = Vec::with_capacity(self.steps() + 1);
        let mut fields = Vec::with_capacity(self.steps() + 1);
        times.push(0.0);
        fields.push(Field::zeros(self.grid));
        for (j, state) in states.iter().enumerate() {
            let t = if j + 1 == self.steps() {
                self.time.t_end()
            } else {
                (j + 1) as f64 * self.time.dt
            };
            times.push(t);
            fields.push(self.engine.evaluate(state));
        }
        Ok(Trajectory::new(times, fields, TrajectoryMeta::default())?)
    }

    /// Public adjoint, for the duality check `<K h, g> = <h, K* g>`.
    pub fn adjoint_of(&self, fields: &[Field]) -> Result<Control, MdpError> {
        if fields.len() != self.steps() {
            return Err(MdpError::TargetGrid(
                "adjoint needs one field per time cell (t_1 .. t_M)",
            ));
        }
        let n = self.n_cells();
        let mut flat = vec![0.0; self.steps() * n];
        for (j, f) in fields.iter().enumerate() {
            if f.grid() != self.grid {
                return Err(MdpError::TargetGrid("field grid mismatch"));
            }
            flat[j * n..(j + 1) * n].copy_from_slice(f.values());
        }
        let out = self.adjoint_flat(&flat)?;
        Ok(self.flat_to_control(&out))
    }

    fn control_to_flat(&self, control: &Control) -> Result<Vec<f64>, MdpError> {
        if control.n_modes() != self.n_modes || control.n_steps() != self.steps() {
            return Err(MdpError::TargetGrid("control is not on the rate grid"));
        }
        if (control.t_end() - self.time.t_end()).abs() > 1e-12 * self.time.t_end() {
            return Err(MdpError::TargetGrid("control horizon mismatch"));
        }
        Ok(control.coeffs().to_vec())
    }

    fn flat_to_control(&self, hdot: &[f64]) -> Control {
        Control::from_coeffs(
            self.time.t_end(),
            self.steps(),
            self.n_modes,
            hdot.to_vec(),
        )
        .expect("rate-grid control is well-formed")
    }

    /// Control energy `1/2 dt sum hdot^2` of flat coefficients.
    fn energy_of_flat(&self, hdot: &[f64]) -> f64 {
        0.5 * self.time.dt * hdot.iter().map(|h| h * h).sum::<f64>()
    }

    /// Least-norm solve `min (1/2)||hdot||^2` s.t. `K hdot = g`. The
    /// tolerance is relative to the target norm.
    pub fn rate_function(
        &self,
        target: &RateTarget,
        tol: f64,
        max_iter: usize,
    ) -> Result<RateResult, MdpError> {
        if !(tol > 0.0) {
            return Err(MdpError::TargetGrid("tolerance must be positive"));
        }
        let (g_flat, weight, terminal) = match target {
            RateTarget::Trajectory(fields) => {
                if fields.len() != self.steps() {
                    return Err(MdpError::TargetGrid(
                        "trajectory target needs one field per time cell",
                    ));
                }
                let n = self.n_cells();
                let mut flat = vec![0.0; self.steps() * n];
                for (j, f) in fields.iter().enumerate() {
                    if f.grid() != self.grid {
                        return Err(MdpError::TargetGrid("field grid mismatch"));
                    }
                    f.check_finite()?;
                    flat[j * n..(j + 1) * n].copy_from_slice(f.values());
                }
                (flat, self.time.dt * self.grid.dx(), false)
            }
            RateTarget::Terminal(f) => {
                if f.grid() != self.grid {
                    return Err(MdpError::TargetGrid("field grid mismatch"));
                }
                f.check_finite()?;
                (f.values().to_vec(), self.grid.dx(), true)
            }
        };

        let weighted_norm = |v: &[f64]| math::sqrt(weight * v.iter().map(|x| x * x).sum::<f64>());
        let target_norm = weighted_norm(&g_flat);
        let dim = g_flat.len();

        if target_norm == 0.0 {
            return Ok(RateResult {
                value: 0.0,
                infinite: false,
                control: self.flat_to_control(&vec![0.0; self.steps() * self.n_modes]),
                residual: 0.0,
                relative_residual: 0.0,
                target_norm,
                iterations: 0,
                converged: true,
            });
        }

        let apply = |w: &[f64]| -> Result<Vec<f64>, MdpError> {
            if terminal {
                let h = self.adjoint_terminal_flat(w)?;
                Ok(self.forward_terminal_flat(&h))
            } else {
                let h = self.adjoint_flat(w)?;
                Ok(self.forward_flat(&h))
            }
        };

        // CG on the Gram operator; constant weights cancel from the
        // coefficients, so plain dots drive the iteration.
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut w = vec![0.0; dim];
        let mut r = g_flat.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut iterations = 0;
        let mut converged = false;
        let mut stalled = false;
        let mut history: Vec<f64> = vec![math::sqrt(rr)];

        while iterations < max_iter {
            let res_norm = math::sqrt(weight * rr);
            if res_norm <= tol * target_norm {
                converged = true;
                break;
            }
            if history.len() > STALL_WINDOW {
                let before = history[history.len() - 1 - STALL_WINDOW];
                let now = history[history.len() - 1];
                if now > STALL_FACTOR * before {
                    stalled = true;
                    break;
                }
            }
            let ap = apply(&p)?;
            let p_ap = dot(&p, &ap);
            if !(p_ap > 1e-300) {
                // Direction annihilated: nothing left of the target in range.
                stalled = true;
                break;
            }
            let alpha = rr / p_ap;
            for i in 0..dim {
                w[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for i in 0..dim {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
            iterations += 1;
            history.push(math::sqrt(rr));
        }
        if !converged && !stalled {
            // Ran out of iterations; decide by the stall rule on the tail.
            let len = history.len();
            if len > STALL_WINDOW {
                stalled = history[len - 1] > STALL_FACTOR * history[len - 1 - STALL_WINDOW];
            }
        }

        let hdot = if terminal {
            self.adjoint_terminal_flat(&w)?
        } else {
            self.adjoint_flat(&w)?
        };
        let reproduced = if terminal {
            self.forward_terminal_flat(&hdot)
        } else {
            self.forward_flat(&hdot)
        };
        let residual = {
            let mut acc = 0.0;
            for i in 0..dim {
                let d = reproduced[i] - g_flat[i];
                acc += d * d;
            }
            math::sqrt(weight * acc)
        };
        let relative_residual = residual / target_norm;
        let infinite = stalled && !converged;
        Ok(RateResult {
            value: if infinite {
                f64::INFINITY
            } else {
                self.energy_of_flat(&hdot)
            },
            infinite,
            control: self.flat_to_control(&hdot),
            residual,
            relative_residual,
            target_norm,
            iterations,
            converged,
        })
    }

    /// Rate of the norm super-level event `{ ||L X|| >= c }` by quadratic
    /// homogeneity: scale each dictionary direction onto the boundary and
    /// keep the cheapest, `I_F = c^2 * min_d I(X_d) / ||L X_d||^2`. The
    /// dictionary holds per-mode impulse controls with constant and
    /// ramp-down time profiles; the reduction is exact over that family and
    /// an upper bound in general.
    pub fn rate_of_event(
        &self,
        event: &EventSpec,
        tol: f64,
        max_iter: usize,
    ) -> Result<EventRate, MdpError> {
        event.validate()?;
        let zero_control = self.flat_to_control(&vec![0.0; self.steps() * self.n_modes]);
        if event.threshold == 0.0 {
            return Ok(EventRate {
                value: 0.0,
                infinite: false,
                control: zero_control,
                target: vec![Field::zeros(self.grid); self.steps()],
            });
        }
        let t_end = self.time.t_end();
        let mut best: Option<(f64, f64, Control, Vec<Field>)> = None;
        for k in 1..=self.n_modes {
            for profile in 0..2usize {
                let control = match profile {
                    0 => Control::constant_mode(t_end, self.steps(), self.n_modes, k, 1.0)?,
                    _ => Control::zero(t_end, self.steps(), self.n_modes)?
                        .with_mode(k, |t| 1.0 - t / t_end)?,
                };
                let traj = self.skeleton_of(&control)?;
                let norm = event.evaluate(&traj)?;
                if !(norm > 1e-13) {
                    continue;
                }
                let target = RateTarget::Trajectory(traj.fields()[1..].to_vec());
                let solve = self.rate_function(&target, tol, max_iter)?;
                if solve.infinite {
                    continue;
                }
                let scale = event.threshold / norm;
                let value = scale * scale * solve.value;
                if best.as_ref().map_or(true, |(v, ..)| value < *v) {
                    let scaled_fields: Vec<Field> = traj.fields()[1..]
                        .iter()
                        .map(|f| f.map(|v| v * scale))
                        .collect();
                    best = Some((value, scale, solve.control, scaled_fields));
                }
            }
        }
        match best {
            Some((value, scale, control, target)) => Ok(EventRate {
                value,
                infinite: false,
                control: control.scale(scale),
                target,
            }),
            None => Ok(EventRate {
                value: f64::INFINITY,
                infinite: true,
                control: zero_control,
                target: Vec::new(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::EventFunctional;
    use crate::model::lp_norm;

    fn noise() -> NoiseModel {
        NoiseModel::default_model()
    }

    fn problem(noise: &NoiseModel) -> RateProblem<'_> {
        let grid = TorusGrid::new(64).unwrap();
        let time = TimeGrid {
            n_steps: 24,
            dt: 1.0 / 24.0,
        };
        RateProblem::new(noise, 1.0, grid, time).unwrap()
    }

    #[test]
    fn zero_target_has_zero_rate() {
        let n = noise();
        let p = problem(&n);
        let target = RateTarget::Trajectory(vec![Field::zeros(p.grid()); p.time().n_steps]);
        let result = p.rate_function(&target, 1e-8, 500).unwrap();
        assert!(result.converged);
        assert_eq!(result.value, 0.0);
        assert_eq!(result.control.energy(), 0.0);
    }

    #[test]
    fn adjoint_identity_holds() {
        // <K h, g> = <h, K* g> with the dt / dt*dx weighted pairings.
        let n = noise();
        let p = problem(&n);
        let grid = p.grid();
        let m = p.time().n_steps;
        let dt = p.time().dt;
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let h = Control::from_coeffs(
                1.0,
                m,
                n.n_modes(),
                (0..m * n.n_modes()).map(|_| next()).collect(),
            )
            .unwrap();
            let g: Vec<Field> = (0..m)
                .map(|_| Field::from_values(grid, (0..grid.n_cells()).map(|_| next()).collect()).unwrap())
                .collect();
            let kh = p.skeleton_of(&h).unwrap();
            let lhs: f64 = (0..m)
                .map(|j| {
                    dt * grid.dx()
                        * kh.field(j + 1)
                            .values()
                            .iter()
                            .zip(g[j].values())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .sum();
            let kg = p.adjoint_of(&g).unwrap();
            let rhs: f64 = dt * h
                .coeffs()
                .iter()
                .zip(kg.coeffs())
                .map(|(a, b)| a * b)
                .sum::<f64>();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "lhs {lhs}, rhs {rhs}"
            );
        }
    }

    #[test]
    fn recovers_a_known_control() {
        let n = noise();
        let p = problem(&n);
        let h0 = Control::constant_mode(1.0, p.time().n_steps, n.n_modes(), 2, 0.8).unwrap();
        let g = p.skeleton_of(&h0).unwrap();
        let target = RateTarget::from_trajectory(&g, &p).unwrap();
        let result = p.rate_function(&target, 1e-9, 2000).unwrap();
        assert!(result.converged, "{result:?}");
        assert!(result.relative_residual <= 1e-8);
        assert!(
            result.value <= h0.energy() + 1e-8,
            "I = {}, energy = {}",
            result.value,
            h0.energy()
        );
        // Resimulating the minimizer reproduces the target.
        let again = p.skeleton_of(&result.control).unwrap();
        let gap = again.difference(&g).unwrap().l1_l1_norm().unwrap();
        assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn rate_is_a_quadratic_form() {
        let n = noise();
        let p = problem(&n);
        let h0 = Control::zero(1.0, p.time().n_steps, n.n_modes())
            .unwrap()
            .with_mode(1, |t| 0.5 + t)
            .unwrap()
            .with_mode(3, |t| math::sin(math::TAU * t))
            .unwrap();
        let g = p.skeleton_of(&h0).unwrap();
        let base = RateTarget::from_trajectory(&g, &p).unwrap();
        let doubled = RateTarget::Trajectory(
            g.fields()[1..].iter().map(|f| f.map(|v| 2.0 * v)).collect(),
        );
        let i1 = p.rate_function(&base, 1e-10, 4000).unwrap();
        let i2 = p.rate_function(&doubled, 1e-10, 4000).unwrap();
        assert!(i1.converged && i2.converged);
        let ratio = i2.value / i1.value;
        assert!(
            (ratio - 4.0).abs() <= 4.0 * 1e-6,
            "homogeneity ratio {ratio}"
        );
    }

    #[test]
    fn out_of_span_target_is_infeasible() {
        // Spatial frequency K/2 + 1 is outside the noise span.
        let n = noise();
        let p = problem(&n);
        let m_out = n.max_frequency() + 1;
        let f = Field::from_fn(p.grid(), |x| math::cos(math::TAU * m_out as f64 * x));
        let target = RateTarget::Trajectory(vec![f; p.time().n_steps]);
        let result = p.rate_function(&target, 1e-8, 400).unwrap();
        assert!(result.infinite, "{result:?}");
        assert!(result.value.is_infinite());
        assert!(!result.converged);
    }

    #[test]
    fn optimality_beats_no_feasible_control() {
        // Any control reproducing K h0 costs at least the least-norm value.
        let n = noise();
        let p = problem(&n);
        let wasteful = Control::zero(1.0, p.time().n_steps, n.n_modes())
            .unwrap()
            .with_mode(2, |t| if t < 0.5 { 2.0 } else { -0.4 })
            .unwrap();
        let g = p.skeleton_of(&wasteful).unwrap();
        let target = RateTarget::from_trajectory(&g, &p).unwrap();
        let result = p.rate_function(&target, 1e-9, 3000).unwrap();
        assert!(result.converged);
        assert!(result.value <= wasteful.energy() + 1e-8);
    }

    #[test]
    fn terminal_event_rate_matches_closed_form() {
        // Single constant mode (k = 1): X(T) = gamma * int hdot, so the
        // cheapest control hitting ||X(T)||_L1 = c is constant with
        // I = c^2 / (2 gamma^2 T).
        let n = NoiseModel::trig(1, 0.25, 2.0, crate::model::StateFactor::Additive).unwrap();
        let grid = TorusGrid::new(64).unwrap();
        let time = TimeGrid {
            n_steps: 32,
            dt: 1.0 / 32.0,
        };
        let p = RateProblem::new(&n, 1.0, grid, time).unwrap();
        let c = 0.3;
        let event = EventSpec {
            functional: EventFunctional::TerminalL1Norm,
            threshold: c,
        };
        let rate = p.rate_of_event(&event, 1e-10, 2000).unwrap();
        let gamma = n.gamma(1).unwrap();
        let expect = c * c / (2.0 * gamma * gamma * 1.0);
        assert!(
            (rate.value - expect).abs() <= 1e-6 * expect,
            "got {}, expect {expect}",
            rate.value
        );
        // The minimizing control reaches the boundary.
        let traj = p.skeleton_of(&rate.control).unwrap();
        let norm = lp_norm(traj.last_field(), 1.0).unwrap();
        assert!((norm - c).abs() <= 1e-8 * c.max(1.0));
    }

    #[test]
    fn event_rate_scales_quadratically_in_the_threshold() {
        let n = noise();
        let p = problem(&n);
        let e1 = EventSpec {
            functional: EventFunctional::TrajectoryL1L1Norm,
            threshold: 0.2,
        };
        let e2 = EventSpec {
            functional: EventFunctional::TrajectoryL1L1Norm,
            threshold: 0.4,
        };
        let r1 = p.rate_of_event(&e1, 1e-9, 2000).unwrap();
        let r2 = p.rate_of_event(&e2, 1e-9, 2000).unwrap();
        let ratio = r2.value / r1.value;
        assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
        // Zero threshold is free.
        let free = p
            .rate_of_event(
                &EventSpec {
                    functional: EventFunctional::TerminalL1Norm,
                    threshold: 0.0,
                },
                1e-9,
                100,
            )
            .unwrap();
        assert_eq!(free.value, 0.0);
    }

    #[test]
    fn empty_noise_event_is_infeasible() {
        let n = NoiseModel::trig(0, 0.25, 2.0, crate::model::StateFactor::Additive).unwrap();
        let grid = TorusGrid::new(32).unwrap();
        let time = TimeGrid {
            n_steps: 8,
            dt: 1.0 / 8.0,
        };
        let p = RateProblem::new(&n, 1.0, grid, time).unwrap();
        let event = EventSpec {
            functional: EventFunctional::TerminalL1Norm,
            threshold: 0.1,
        };
        let rate = p.rate_of_event(&event, 1e-8, 100).unwrap();
        assert!(rate.infinite);
    }
}
