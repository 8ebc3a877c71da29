use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FluxModel, ModelError, TorusGrid};
use crate::math;

/// State dependence of the noise amplitude, `sigma` in
/// `g_k(x, u) = gamma_k * phi_k(x) * sigma(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StateFactor {
    /// `sigma(u) = 1`.
    Additive,
    /// `sigma(u) = u`.
    Linear,
}

impl StateFactor {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            StateFactor::Additive => 1.0,
            StateFactor::Linear => u,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            StateFactor::Additive => 0.0,
            StateFactor::Linear => 1.0,
        }
    }
}

/// Truncated noise family `g_k(x, u) = gamma_k * phi_k(x) * sigma(u)`,
/// `k = 1..=K`, with the orthonormal trigonometric spatial basis
///
/// ```text
///   phi_1 = 1,
///   phi_{2m}   = sqrt(2) cos(2 pi m x),
///   phi_{2m+1} = sqrt(2) sin(2 pi m x).
/// ```
///
/// The declared bound constants are conservative:
/// `D0 = 4 sum gamma_k^2` and
/// `D1 = 8 pi^2 K^2 max(gamma_k^2) (1 + Lip(sigma)^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    gammas: Vec<f64>,
    factor: StateFactor,
    d0: f64,
    d1: f64,
}

pub(crate) const SQRT_2: f64 = core::f64::consts::SQRT_2;

impl NoiseModel {
    /// Power-law amplitudes `gamma_k = gamma0 * k^{-decay}` over `K` modes.
    pub fn trig(
        n_modes: usize,
        gamma0: f64,
        decay: f64,
        factor: StateFactor,
    ) -> Result<Self, ModelError> {
        if !(gamma0 >= 0.0) || !gamma0.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "noise amplitude gamma0",
                value: gamma0,
            });
        }
        if !decay.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "noise decay exponent",
                value: decay,
            });
        }
        let gammas = (1..=n_modes)
            .map(|k| gamma0 * math::pow(k as f64, -decay))
            .collect();
        Self::from_gammas(gammas, factor)
    }

    pub fn from_gammas(gammas: Vec<f64>, factor: StateFactor) -> Result<Self, ModelError> {
        for &g in &gammas {
            if !g.is_finite() || g < 0.0 {
                return Err(ModelError::InvalidParameter {
                    what: "noise amplitude gamma_k",
                    value: g,
                });
            }
        }
        let k = gammas.len() as f64;
        let sum_sq: f64 = gammas.iter().map(|g| g * g).sum();
        let max_sq = gammas.iter().fold(0.0_f64, |m, &g| m.max(g * g));
        let pi_sq = core::f64::consts::PI * core::f64::consts::PI;
        let d0 = 4.0 * sum_sq;
        let d1 = 8.0 * pi_sq * k * k * max_sq * (1.0 + factor.lipschitz() * factor.lipschitz());
        Ok(Self {
            gammas,
            factor,
            d0,
            d1,
        })
    }

    /// Default family: `K = 8`, `gamma0 = 0.25`, decay `2`, additive.
    pub fn default_model() -> Self {
        Self::trig(8, 0.25, 2.0, StateFactor::Additive).expect("default noise parameters")
    }

    pub fn n_modes(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn state_factor(&self) -> StateFactor {
        self.factor
    }

    pub fn sigma(&self, u: f64) -> f64 {
        self.factor.eval(u)
    }

    /// Amplitude of mode `k` (1-based).
    pub fn gamma(&self, k: usize) -> Result<f64, ModelError> {
        self.check_mode(k)?;
        Ok(self.gammas[k - 1])
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn sum_gamma_sq(&self) -> f64 {
        self.gammas.iter().map(|g| g * g).sum()
    }

    /// Spatial frequency `m` of mode `k` (1-based): `0, 1, 1, 2, 2, ...`.
    pub fn frequency_of(k: usize) -> usize {
        k / 2
    }

    /// Whether mode `k` rides the cosine line (`k` even); `k = 1` is the
    /// constant mode, `k` odd and `>= 3` the sine line.
    pub fn is_cosine(k: usize) -> bool {
        k >= 2 && k % 2 == 0
    }

    /// Largest spatial frequency present, `floor(K / 2)`.
    pub fn max_frequency(&self) -> usize {
        Self::frequency_of(self.n_modes().max(1))
    }

    pub(crate) fn basis_value(k: usize, x: f64) -> f64 {
        if k == 1 {
            return 1.0;
        }
        let m = Self::frequency_of(k) as f64;
        if Self::is_cosine(k) {
            SQRT_2 * math::cos(math::TAU * m * x)
        } else {
            SQRT_2 * math::sin(math::TAU * m * x)
        }
    }

    /// `g_k(x, u)`; `k` is 1-based and checked.
    pub fn eval(&self, k: usize, x: f64, u: f64) -> Result<f64, ModelError> {
        self.check_mode(k)?;
        Ok(self.gammas[k - 1] * Self::basis_value(k, x) * self.factor.eval(u))
    }

    /// `G^2(x, u) = sum_k g_k(x, u)^2`.
    pub fn g_squared(&self, x: f64, u: f64) -> f64 {
        let s = self.factor.eval(u);
        let s2 = s * s;
        self.gammas
            .iter()
            .enumerate()
            .map(|(idx, &g)| {
                let b = Self::basis_value(idx + 1, x);
                g * g * b * b * s2
            })
            .sum()
    }

    pub fn declared_d0(&self) -> f64 {
        self.d0
    }

    pub fn declared_d1(&self) -> f64 {
        self.d1
    }

    /// The noise frozen at the reference state `u = 1`: an additive model
    /// with the same amplitudes (`sigma(1) = 1` for both factors). This is
    /// the coefficient of the linear limit equation.
    pub fn frozen_at_one(&self) -> NoiseModel {
        NoiseModel::from_gammas(self.gammas.clone(), StateFactor::Additive)
            .expect("amplitudes already validated")
    }

    /// Precompute `phi_k(x_i)` for all modes and cells.
    pub fn basis_table(&self, grid: TorusGrid) -> BasisTable {
        let n = grid.n_cells();
        let k_modes = self.n_modes();
        let mut values = vec![0.0; k_modes * n];
        for k in 1..=k_modes {
            let row = &mut values[(k - 1) * n..k * n];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = Self::basis_value(k, grid.cell_center(i));
            }
        }
        BasisTable {
            n_cells: n,
            values,
        }
    }

    /// Discrete `L^2` norms `||g_k(., 1)||^2` summed over modes, the rate at
    /// which the Ito isometry grows: `E||u^1(t)||^2 = t * sum_k ||g_k||^2`
    /// under pure transport.
    pub fn isometry_rate(&self, grid: TorusGrid) -> f64 {
        let table = self.basis_table(grid);
        let dx = grid.dx();
        self.gammas
            .iter()
            .enumerate()
            .map(|(idx, &g)| {
                let row = table.row(idx);
                g * g * dx * row.iter().map(|b| b * b).sum::<f64>()
            })
            .sum()
    }

    fn check_mode(&self, k: usize) -> Result<(), ModelError> {
        if k == 0 || k > self.n_modes() {
            return Err(ModelError::ModeOutOfRange {
                k,
                max: self.n_modes(),
            });
        }
        Ok(())
    }
}

/// Mode-major table of `phi_k(x_i)` values.
#[derive(Debug, Clone)]
pub struct BasisTable {
    n_cells: usize,
    values: Vec<f64>,
}

impl BasisTable {
    /// Row for 0-based mode index (`idx = k - 1`).
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.n_cells..(idx + 1) * self.n_cells]
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
}

/// Sampling box for the empirical Hypothesis-H check. Spatial points always
/// range over the whole torus; states and flux arguments over `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct SampleBox {
    pub state_lo: f64,
    pub state_hi: f64,
    pub flux_lo: f64,
    pub flux_hi: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            state_lo: -3.0,
            state_hi: 3.0,
            flux_lo: -3.0,
            flux_hi: 3.0,
        }
    }
}

/// Empirical suprema of the three Hypothesis-H ratios against the declared
/// constants. `pass` means every observed ratio stayed at or below its
/// declared bound.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct HypothesisReport {
    pub d0_hat: f64,
    pub d0_declared: f64,
    pub d1_hat: f64,
    pub d1_declared: f64,
    pub gamma_hat: f64,
    pub gamma_declared: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Empirical supremum of the bound ratios over `sample_count` random draws:
///
/// * `D0_hat  = sup G^2(x, u) / (1 + u^2)`
/// * `D1_hat  = sup sum_k (g_k(x,u) - g_k(y,v))^2 / (d_T(x,y)^2 + (u-v)^2)`
/// * `Gamma_hat = sup |a(xi) - a(zeta)| / ((1 + |xi|^{p-1} + |zeta|^{p-1}) |xi - zeta|)`
///
/// with `d_T` the torus distance. Callers should use at least 10^3 samples.
/// Failure is a report outcome, never an error.
pub fn verify_hypothesis_bounds(
    noise: &NoiseModel,
    flux: &FluxModel,
    sample_count: usize,
    sample_box: SampleBox,
    seed: u64,
) -> HypothesisReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span_u = sample_box.state_hi - sample_box.state_lo;
    let span_xi = sample_box.flux_hi - sample_box.flux_lo;
    let mut d0_hat = 0.0_f64;
    let mut d1_hat = 0.0_f64;
    let mut gamma_hat = 0.0_f64;
    for _ in 0..sample_count {
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        let u = sample_box.state_lo + span_u * rng.random::<f64>();
        let v = sample_box.state_lo + span_u * rng.random::<f64>();
        let xi = sample_box.flux_lo + span_xi * rng.random::<f64>();
        let zeta = sample_box.flux_lo + span_xi * rng.random::<f64>();

        d0_hat = d0_hat.max(noise.g_squared(x, u) / (1.0 + u * u));

        let dist = TorusGrid::torus_distance(x, y);
        let denom = dist * dist + (u - v) * (u - v);
        if denom > 1e-12 {
            let mut num = 0.0;
            for k in 1..=noise.n_modes() {
                let d = noise.eval(k, x, u).expect("in range")
                    - noise.eval(k, y, v).expect("in range");
                num += d * d;
            }
            d1_hat = d1_hat.max(num / denom);
        }

        let gap = (xi - zeta).abs();
        if gap > 1e-12 {
            let q = flux.growth_exponent() - 1.0;
            let shape = 1.0 + math::pow(xi.abs(), q) + math::pow(zeta.abs(), q);
            gamma_hat = gamma_hat.max((flux.derivative(xi) - flux.derivative(zeta)).abs() / (shape * gap));
        }
    }
    let pass = d0_hat <= noise.declared_d0()
        && d1_hat <= noise.declared_d1()
        && gamma_hat <= flux.growth_constant();
    HypothesisReport {
        d0_hat,
        d0_declared: noise.declared_d0(),
        d1_hat,
        d1_declared: noise.declared_d1(),
        gamma_hat,
        gamma_declared: flux.growth_constant(),
        samples: sample_count,
        pass,
    }
}
