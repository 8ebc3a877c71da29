use alloc::vec;
use alloc::vec::Vec;

use super::{BandCoeffs, SpectralPropagator};
use crate::model::{Control, Field, NoiseModel, TorusGrid, WienerPath};
use crate::solvers::{SolverError, TimeGrid, Trajectory, TrajectoryMeta};

/// Incremental mode-space integrator shared by the stochastic convolution
/// and the skeleton equation: each step propagates the accumulated state by
/// `dt` (rotation + decay per frequency), then adds the fresh per-mode
/// input. Feeding `dbeta_k` reproduces the linear SPDE; feeding
/// `hdot_k * dt` reproduces the skeleton, so a path concentrated in one mode
/// with `hdot = dbeta / dt` drives both to the same trajectory.
pub struct ConvolutionEngine<'a> {
    noise: &'a NoiseModel,
    grid: TorusGrid,
    dt: f64,
    m_max: usize,
    /// Per frequency `m = 1..=m_max`: one-step (cos, sin, decay).
    step_factors: Vec<(f64, f64, f64)>,
    /// Per mode `k` (0-based): injection weight into its spectral line
    /// (`gamma_k` for the constant mode, `gamma_k * sqrt(2)` otherwise).
    weights: Vec<f64>,
    /// Per frequency: cos/sin tables at cell centers for field synthesis.
    cos_tab: Vec<Vec<f64>>,
    sin_tab: Vec<Vec<f64>>,
}

impl<'a> ConvolutionEngine<'a> {
    pub fn new(
        noise: &'a NoiseModel,
        prop: &SpectralPropagator,
        grid: TorusGrid,
        dt: f64,
    ) -> Result<Self, SolverError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SolverError::InvalidConfig("engine needs dt > 0"));
        }
        let m_max = noise.max_frequency();
        let step_factors = (1..=m_max).map(|m| prop.mode_factor(m, dt)).collect();
        let weights = (1..=noise.n_modes())
            .map(|k| {
                let g = noise.gamma(k).expect("in range");
                if k == 1 {
                    g
                } else {
                    g * core::f64::consts::SQRT_2
                }
            })
            .collect();
        let mut cos_tab = Vec::with_capacity(m_max);
        let mut sin_tab = Vec::with_capacity(m_max);
        for m in 1..=m_max {
            let mut c = vec![0.0; grid.n_cells()];
            let mut s = vec![0.0; grid.n_cells()];
            for i in 0..grid.n_cells() {
                let angle = crate::math::TAU * m as f64 * grid.cell_center(i);
                c[i] = crate::math::cos(angle);
                s[i] = crate::math::sin(angle);
            }
            cos_tab.push(c);
            sin_tab.push(s);
        }
        Ok(Self {
            noise,
            grid,
            dt,
            m_max,
            step_factors,
            weights,
            cos_tab,
            sin_tab,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub(crate) fn m_max(&self) -> usize {
        self.m_max
    }

    pub(crate) fn zero_state(&self) -> BandCoeffs {
        BandCoeffs::zeros(self.m_max)
    }

    /// Propagate the accumulated state by one step.
    pub(crate) fn step(&self, state: &mut BandCoeffs) {
        for (m, &(c, s, d)) in self.step_factors.iter().enumerate() {
            let [a, b] = state.pairs[m];
            state.pairs[m] = [d * (a * c - b * s), d * (a * s + b * c)];
        }
    }

    /// Propagate by one step under the adjoint (reversed transport, same
    /// decay); used by the rate-function machinery.
    pub(crate) fn step_adjoint(&self, state: &mut BandCoeffs) {
        for (m, &(c, s, d)) in self.step_factors.iter().enumerate() {
            let [a, b] = state.pairs[m];
            state.pairs[m] = [d * (a * c + b * s), d * (b * c - a * s)];
        }
    }

    /// Add `amount * g_k(., 1)` to the state, `k` 0-based.
    pub(crate) fn inject(&self, state: &mut BandCoeffs, k_idx: usize, amount: f64) {
        if amount == 0.0 {
            return;
        }
        let w = self.weights[k_idx] * amount;
        let k = k_idx + 1;
        if k == 1 {
            state.c0 += w;
            return;
        }
        let m = NoiseModel::frequency_of(k);
        if NoiseModel::is_cosine(k) {
            state.pairs[m - 1][0] += w;
        } else {
            state.pairs[m - 1][1] += w;
        }
    }

    /// `<weight_k * line_k, g>_{L^2}` for every mode: the observation
    /// operator adjoint to `inject`.
    pub(crate) fn read_adjoint(&self, state: &BandCoeffs, out: &mut [f64]) {
        for (k_idx, slot) in out.iter_mut().enumerate() {
            let k = k_idx + 1;
            let raw = if k == 1 {
                state.c0
            } else {
                let m = NoiseModel::frequency_of(k);
                let pair = state.pairs[m - 1];
                0.5 * if NoiseModel::is_cosine(k) {
                    pair[0]
                } else {
                    pair[1]
                }
            };
            *slot = self.weights[k_idx] * raw;
        }
    }

    /// Synthesize the field at cell centers.
    pub(crate) fn evaluate(&self, state: &BandCoeffs) -> Field {
        let n = self.grid.n_cells();
        let mut values = vec![state.c0; n];
        for m in 0..self.m_max {
            let [a, b] = state.pairs[m];
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let (ct, st) = (&self.cos_tab[m], &self.sin_tab[m]);
            for i in 0..n {
                values[i] += a * ct[i] + b * st[i];
            }
        }
        Field::from_values(self.grid, values).expect("length preserved")
    }

    fn run(
        &self,
        n_steps: usize,
        stride: usize,
        mut input: impl FnMut(usize, usize) -> f64,
        meta: TrajectoryMeta,
    ) -> Result<Trajectory, SolverError> {
        if stride == 0 {
            return Err(SolverError::InvalidConfig("output_stride must be >= 1"));
        }
        let time = TimeGrid {
            n_steps,
            dt: self.dt,
        };
        let mut state = self.zero_state();
        let mut times = Vec::with_capacity(n_steps / stride + 2);
        let mut fields = Vec::with_capacity(n_steps / stride + 2);
        times.push(0.0);
        fields.push(Field::zeros(self.grid));
        for j in 0..n_steps {
            self.step(&mut state);
            for k_idx in 0..self.noise.n_modes() {
                let amount = input(j, k_idx);
                self.inject(&mut state, k_idx, amount);
            }
            let done = j + 1 == n_steps;
            if done || (j + 1) % stride == 0 {
                let t = if done {
                    time.t_end()
                } else {
                    (j + 1) as f64 * self.dt
                };
                times.push(t);
                fields.push(self.evaluate(&state));
            }
        }
        Trajectory::new(times, fields, meta)
    }
}

/// The linear limit equation driven by the noise frozen at the reference
/// state, `dv + speed * d_x v dt = eta * Lap(v) dt + Phi(1) dW`, `v(0) = 0`,
/// integrated as an incremental stochastic convolution on the path's grid.
pub fn solve_linear_spde(
    noise: &NoiseModel,
    prop: &SpectralPropagator,
    grid: TorusGrid,
    path: &WienerPath,
    stride: usize,
) -> Result<Trajectory, SolverError> {
    if path.n_modes() != noise.n_modes() {
        return Err(SolverError::PathMismatch(
            "path mode count does not match the noise model",
        ));
    }
    let engine = ConvolutionEngine::new(noise, prop, grid, path.dt())?;
    let meta = TrajectoryMeta {
        eta: prop.eta(),
        ..TrajectoryMeta::default()
    };
    engine.run(
        path.n_steps(),
        stride,
        |j, k_idx| path.increment(j, k_idx),
        meta,
    )
}

/// The skeleton equation `dX + speed * d_x X dt = eta Lap(X) dt + Phi(1) hdot dt`,
/// `X(0) = 0`, integrated by the same engine with `hdot_k(t_j) * dt` in
/// place of the Brownian increments. Linear in the control.
pub fn solve_skeleton(
    noise: &NoiseModel,
    prop: &SpectralPropagator,
    grid: TorusGrid,
    control: &Control,
    time: TimeGrid,
    stride: usize,
) -> Result<Trajectory, SolverError> {
    if control.n_modes() != noise.n_modes() {
        return Err(SolverError::PathMismatch(
            "control mode count does not match the noise model",
        ));
    }
    if (control.t_end() - time.t_end()).abs() > 1e-9 * control.t_end() {
        return Err(SolverError::PathMismatch(
            "control horizon does not match the requested time grid",
        ));
    }
    let engine = ConvolutionEngine::new(noise, prop, grid, time.dt)?;
    let dt = time.dt;
    let meta = TrajectoryMeta {
        eta: prop.eta(),
        ..TrajectoryMeta::default()
    };
    // Sample the piecewise-constant control at step midpoints: cell
    // boundaries of commensurate grids are then never hit by rounding.
    engine.run(
        time.n_steps,
        stride,
        |j, k_idx| control.value_at((j as f64 + 0.5) * dt, k_idx) * dt,
        meta,
    )
}

/// Exact second moment of the transported convolution at time `t` when
/// `eta = 0`: `E ||v(t)||_{L^2}^2 = t * sum_k ||g_k(., 1)||_{L^2}^2`
/// (transport is unitary, increments are independent).
pub fn ito_isometry_prediction(noise: &NoiseModel, grid: TorusGrid, t: f64) -> f64 {
    t * noise.isometry_rate(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use crate::model::{lp_norm, StateFactor, StreamKey};

    fn grid() -> TorusGrid {
        TorusGrid::new(64).unwrap()
    }

    fn noise() -> NoiseModel {
        NoiseModel::default_model()
    }

    fn prop() -> SpectralPropagator {
        SpectralPropagator::new(1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_path_gives_zero_solution() {
        let n = noise();
        let path = WienerPath::zero(n.n_modes(), 32, 1.0 / 32.0).unwrap();
        let traj = solve_linear_spde(&n, &prop(), grid(), &path, 1).unwrap();
        for f in traj.fields() {
            assert!(f.max_abs() == 0.0);
        }
    }

    #[test]
    fn zero_control_gives_zero_skeleton() {
        let n = noise();
        let h = Control::zero(1.0, 16, n.n_modes()).unwrap();
        let time = TimeGrid {
            n_steps: 64,
            dt: 1.0 / 64.0,
        };
        let traj = solve_skeleton(&n, &prop(), grid(), &h, time, 1).unwrap();
        for f in traj.fields() {
            assert!(f.max_abs() == 0.0);
        }
    }

    #[test]
    fn ito_isometry_monte_carlo() {
        // E||v(0.5)||^2 = 0.5 * sum_k ||g_k||^2 under unitary transport.
        let n = noise();
        let g = grid();
        let p = prop();
        let t_end = 0.5;
        let steps = 128;
        let dt = t_end / steps as f64;
        let reps = 2000u32;
        let mut acc = 0.0;
        for rep in 0..reps {
            let key = StreamKey::new(2024, 11, rep);
            let path = WienerPath::generate(key, n.n_modes(), steps, dt).unwrap();
            let traj = solve_linear_spde(&n, &p, g, &path, steps).unwrap();
            let norm = lp_norm(traj.last_field(), 2.0).unwrap();
            acc += norm * norm;
        }
        let estimate = acc / reps as f64;
        let predict = ito_isometry_prediction(&n, g, t_end);
        assert!(
            (estimate / predict - 1.0).abs() < 0.1,
            "estimate {estimate}, predict {predict}"
        );
    }

    #[test]
    fn discrete_isometry_is_exact_in_expectation_structure() {
        // One increment in a rotating mode keeps its L2 norm (eta = 0).
        let n = noise();
        let g = grid();
        let engine = ConvolutionEngine::new(&n, &prop(), g, 0.013).unwrap();
        let mut state = engine.zero_state();
        engine.inject(&mut state, 3, 1.0);
        let before = lp_norm(&engine.evaluate(&state), 2.0).unwrap();
        for _ in 0..57 {
            engine.step(&mut state);
        }
        let after = lp_norm(&engine.evaluate(&state), 2.0).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn viscous_gap_shrinks_with_eta() {
        // || v_eta - v_0 ||_{L1 L1} decreasing over eta -> 0 at a fixed path.
        let n = noise();
        let g = grid();
        let steps = 256;
        let dt = 1.0 / steps as f64;
        let key = StreamKey::new(5, 2, 0);
        let path = WienerPath::generate(key, n.n_modes(), steps, dt).unwrap();
        let base = solve_linear_spde(&n, &prop(), g, &path, 1).unwrap();
        let mut prev = f64::INFINITY;
        for eta in [0.1, 0.03, 0.01, 0.003] {
            let p = SpectralPropagator::new(1.0, eta).unwrap();
            let traj = solve_linear_spde(&n, &p, g, &path, 1).unwrap();
            let gap = traj.difference(&base).unwrap().l1_l1_norm().unwrap();
            assert!(gap < prev, "eta={eta}: {gap} !< {prev}");
            prev = gap;
        }
    }

    #[test]
    fn skeleton_single_mode_closed_form() {
        // Mode k = 2 (sqrt(2) cos(2 pi x)), hdot = c, eta = 0:
        // X(x, t) = gamma c sqrt(2) int_0^t cos(2 pi (x - (t-s) a)) ds, with
        // closed form via the antiderivative of cos.
        let n = noise();
        let g = grid();
        let speed = 1.0;
        let c = 0.7;
        let t_end = 0.73;
        let gamma = n.gamma(2).unwrap();

        let closed = |x: f64, t: f64| {
            // int_0^t cos(2 pi (x - (t - s) a)) ds
            //   = [sin(2 pi x) - sin(2 pi (x - a t))] / (2 pi a)
            gamma * c * core::f64::consts::SQRT_2 * (math::sin(math::TAU * x)
                - math::sin(math::TAU * (x - speed * t)))
                / (math::TAU * speed)
        };

        // Quadrature oracle validates the closed form to 1e-8.
        let quad = |x: f64, t: f64| {
            let n_q = 20_000;
            let h = t / n_q as f64;
            let mut acc = 0.0;
            for i in 0..n_q {
                let s = (i as f64 + 0.5) * h;
                acc += math::cos(math::TAU * (x - (t - s) * speed)) * h;
            }
            gamma * c * core::f64::consts::SQRT_2 * acc
        };
        for &x in &[0.1, 0.37, 0.81] {
            assert!((closed(x, t_end) - quad(x, t_end)).abs() < 1e-8);
        }

        // The engine converges to the closed form at O(dt).
        let mut errors = Vec::new();
        for steps in [512usize, 2048] {
            let h = Control::constant_mode(t_end, steps, n.n_modes(), 2, c).unwrap();
            let time = TimeGrid {
                n_steps: steps,
                dt: t_end / steps as f64,
            };
            let traj = solve_skeleton(&n, &prop(), g, &h, time, steps).unwrap();
            let f = traj.last_field();
            let max_err = (0..g.n_cells())
                .map(|i| (f.values()[i] - closed(g.cell_center(i), t_end)).abs())
                .fold(0.0_f64, f64::max);
            errors.push(max_err);
        }
        assert!(errors[0] < 2e-3, "coarse error {}", errors[0]);
        let ratio = errors[0] / errors[1];
        assert!(
            (2.5..6.0).contains(&ratio),
            "first-order convergence expected, ratio {ratio}"
        );
    }

    #[test]
    fn skeleton_is_linear() {
        let n = noise();
        let g = grid();
        let time = TimeGrid {
            n_steps: 128,
            dt: 1.0 / 128.0,
        };
        let h1 = Control::constant_mode(1.0, 16, n.n_modes(), 1, 0.9).unwrap();
        let h2 = Control::zero(1.0, 16, n.n_modes())
            .unwrap()
            .with_mode(3, |t| math::sin(math::TAU * t))
            .unwrap();
        let sum = h1.add(&h2).unwrap();
        let a = solve_skeleton(&n, &prop(), g, &h1, time, 1).unwrap();
        let b = solve_skeleton(&n, &prop(), g, &h2, time, 1).unwrap();
        let s = solve_skeleton(&n, &prop(), g, &sum, time, 1).unwrap();
        for j in 0..s.len() {
            for i in 0..g.n_cells() {
                let lhs = s.field(j).values()[i];
                let rhs = a.field(j).values()[i] + b.field(j).values()[i];
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn skeleton_map_is_bounded_by_control_energy() {
        // ||X_h||_{L1 L1} <= T * sqrt(sum gamma^2) * sqrt(2 E(h)) on random
        // controls (Cauchy-Schwarz against the orthonormal basis).
        let n = noise();
        let g = grid();
        let time = TimeGrid {
            n_steps: 128,
            dt: 1.0 / 128.0,
        };
        let bound_const = math::sqrt(n.sum_gamma_sq());
        let mut rng_state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            // xorshift for test data
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..5 {
            let coeffs: Vec<f64> = (0..16 * n.n_modes()).map(|_| 4.0 * next()).collect();
            let h = Control::from_coeffs(1.0, 16, n.n_modes(), coeffs).unwrap();
            let traj = solve_skeleton(&n, &prop(), g, &h, time, 1).unwrap();
            let norm = traj.l1_l1_norm().unwrap();
            let bound = 1.0 * bound_const * math::sqrt(2.0 * h.energy());
            assert!(norm <= bound * (1.0 + 1e-9), "{norm} > {bound}");
        }
    }

    #[test]
    fn coupled_path_consistency() {
        // A path concentrated in mode k equals the skeleton driven by
        // hdot = dbeta / dt on the same grid.
        let n = noise();
        let g = grid();
        let steps = 96;
        let dt = 0.5 / steps as f64;
        let key = StreamKey::new(77, 4, 2);
        let full = WienerPath::generate(key, n.n_modes(), steps, dt).unwrap();
        let k_idx = 2; // mode 3, the sin(2 pi x) line
        let mut incs = vec![0.0; steps * n.n_modes()];
        let mut coeffs = vec![0.0; steps * n.n_modes()];
        for j in 0..steps {
            let d = full.increment(j, k_idx);
            incs[j * n.n_modes() + k_idx] = d;
            coeffs[j * n.n_modes() + k_idx] = d / dt;
        }
        let path = WienerPath::from_increments(n.n_modes(), steps, dt, incs).unwrap();
        let h = Control::from_coeffs(0.5, steps, n.n_modes(), coeffs).unwrap();
        let time = TimeGrid { n_steps: steps, dt };
        let a = solve_linear_spde(&n, &prop(), g, &path, 1).unwrap();
        let b = solve_skeleton(&n, &prop(), g, &h, time, 1).unwrap();
        for j in 0..a.len() {
            for i in 0..g.n_cells() {
                let (x, y) = (a.field(j).values()[i], b.field(j).values()[i]);
                assert!((x - y).abs() <= 1e-13 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn engine_ignores_the_state_factor() {
        // The limit equation freezes the noise at u = 1, where sigma = 1 for
        // both factors, so linear-sigma models drive the same convolution.
        let g = grid();
        let additive = NoiseModel::trig(8, 0.25, 2.0, StateFactor::Additive).unwrap();
        let linear = NoiseModel::trig(8, 0.25, 2.0, StateFactor::Linear).unwrap();
        let path =
            WienerPath::generate(StreamKey::new(3, 3, 3), 8, 64, 1.0 / 64.0).unwrap();
        let a = solve_linear_spde(&additive, &prop(), g, &path, 1).unwrap();
        let b = solve_linear_spde(&linear, &prop(), g, &path, 1).unwrap();
        assert_eq!(a.fields(), b.fields());
    }
}
