use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ModelError;
use crate::math;

/// Addressable stream of Gaussian material: a ChaCha8 cipher keyed by
/// `(seed, experiment, replicate, mode, step)`, so every increment is a pure
/// function of its key rather than a position in a shared sequence. Distinct
/// keys give independent streams by the cipher's key separation; identical
/// keys reproduce identical bits, which is what makes replicates both
/// parallelizable and replayable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u32,
    pub replicate: u32,
}

const DOMAIN_TAG: &[u8; 8] = b"FLCTWNR1";

impl StreamKey {
    pub fn new(seed: u64, experiment: u32, replicate: u32) -> Self {
        Self {
            seed,
            experiment,
            replicate,
        }
    }

    fn rng(&self, mode_idx: u32, step: u32) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..12].copy_from_slice(&self.experiment.to_le_bytes());
        bytes[12..16].copy_from_slice(&self.replicate.to_le_bytes());
        bytes[16..20].copy_from_slice(&mode_idx.to_le_bytes());
        bytes[20..24].copy_from_slice(&step.to_le_bytes());
        bytes[24..32].copy_from_slice(DOMAIN_TAG);
        ChaCha8Rng::from_seed(bytes)
    }

    /// One standard normal draw for `(mode, step)`.
    pub fn standard_normal(&self, mode_idx: u32, step: u32) -> f64 {
        self.rng(mode_idx, step).sample(StandardNormal)
    }
}

/// Brownian increments `dbeta_k(t_j) ~ N(0, dt)` for `K` modes on a uniform
/// time grid, pregenerated so that coupled solvers consume identical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    dt: f64,
    n_steps: usize,
    n_modes: usize,
    /// Step-major: `increments[j * n_modes + k]`.
    increments: Vec<f64>,
}

impl WienerPath {
    /// Generate from a stream key; `dbeta_k(t_j) = sqrt(dt) * z(key, k, j)`.
    pub fn generate(
        key: StreamKey,
        n_modes: usize,
        n_steps: usize,
        dt: f64,
    ) -> Result<Self, ModelError> {
        check_grid(n_steps, dt)?;
        let sqrt_dt = math::sqrt(dt);
        let mut increments = vec![0.0; n_steps * n_modes];
        for j in 0..n_steps {
            for k in 0..n_modes {
                increments[j * n_modes + k] = sqrt_dt * key.standard_normal(k as u32, j as u32);
            }
        }
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            increments,
        })
    }

    /// All-zero increments (the deterministic path).
    pub fn zero(n_modes: usize, n_steps: usize, dt: f64) -> Result<Self, ModelError> {
        check_grid(n_steps, dt)?;
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            increments: vec![0.0; n_steps * n_modes],
        })
    }

    /// Build from explicit increments (step-major), mostly for tests and for
    /// paths concentrated in a single mode.
    pub fn from_increments(
        n_modes: usize,
        n_steps: usize,
        dt: f64,
        increments: Vec<f64>,
    ) -> Result<Self, ModelError> {
        check_grid(n_steps, dt)?;
        if increments.len() != n_steps * n_modes {
            return Err(ModelError::ControlShape(
                "increment count must be n_steps * n_modes",
            ));
        }
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            increments,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// `dbeta_k(t_j)`, `k` 0-based.
    pub fn increment(&self, step: usize, k_idx: usize) -> f64 {
        self.increments[step * self.n_modes + k_idx]
    }

    /// All mode increments of one step.
    pub fn increments_at(&self, step: usize) -> &[f64] {
        &self.increments[step * self.n_modes..(step + 1) * self.n_modes]
    }
}

fn check_grid(n_steps: usize, dt: f64) -> Result<(), ModelError> {
    if n_steps == 0 {
        return Err(ModelError::ControlShape("need at least one time step"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ModelError::InvalidParameter {
            what: "time step",
            value: dt,
        });
    }
    Ok(())
}
