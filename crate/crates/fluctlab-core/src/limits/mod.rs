//! Exact spectral solvers for the linear limit objects: the transport(-
//! diffusion) semigroup, the stochastic convolution solved by the limit
//! fluctuation, and the skeleton equation driven by a Cameron-Martin
//! control. The last two share one incremental engine, which enforces the
//! coupled-path consistency between them by construction.

mod convolution;

pub use convolution::{
    ito_isometry_prediction, solve_linear_spde, solve_skeleton, ConvolutionEngine,
};

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::model::{Field, ModelError};
use crate::solvers::SolverError;

/// Solution operator of `d_t f + speed * d_x f = eta * d_xx f` on the torus,
/// diagonal in Fourier space: mode `m` is rotated by `2 pi m speed tau` and
/// damped by `exp(-eta (2 pi m)^2 tau)`.
///
/// With `eta = 0` the multiplier is unimodular, so the map is unitary on the
/// resolvable band. Grid-aligned shifts (`speed * tau` an integer number of
/// cells, `eta = 0`) are performed as exact cyclic rotations. On even grids
/// the unpaired Nyquist line is advanced with frozen phase (modulus kept,
/// diffusion applied): its cosine partner vanishes identically at half-offset
/// cell centers, so no real diagonal transport of that line exists; all
/// fields produced by the noise family live far below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPropagator {
    speed: f64,
    eta: f64,
}

impl SpectralPropagator {
    pub fn new(speed: f64, eta: f64) -> Result<Self, SolverError> {
        if !speed.is_finite() || !(eta >= 0.0) || !eta.is_finite() {
            return Err(SolverError::InvalidConfig(
                "propagator needs finite speed and eta >= 0",
            ));
        }
        Ok(Self { speed, eta })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Rotation/decay factors for frequency `m` over elapsed `tau`.
    pub(crate) fn mode_factor(&self, m: usize, tau: f64) -> (f64, f64, f64) {
        let phase = math::TAU * m as f64 * self.speed * tau;
        let decay = if self.eta > 0.0 {
            let omega = math::TAU * m as f64;
            math::exp(-self.eta * omega * omega * tau)
        } else {
            1.0
        };
        (math::cos(phase), math::sin(phase), decay)
    }

    /// Propagate a field by elapsed time `tau >= 0`.
    pub fn propagate(&self, f: &Field, tau: f64) -> Result<Field, SolverError> {
        if !(tau >= 0.0) {
            return Err(SolverError::InvalidConfig("propagation time must be >= 0"));
        }
        f.check_finite()?;
        if tau == 0.0 {
            return Ok(f.clone());
        }
        let grid = f.grid();
        let n = grid.n_cells();

        if self.eta == 0.0 {
            // Exact cyclic rotation when the shift lands on the grid.
            let cells = self.speed * tau * n as f64;
            let k = math::round(cells);
            if (cells - k).abs() <= 1e-9 * (1.0 + cells.abs()) {
                let k = k as isize;
                let values = (0..n)
                    .map(|i| f.values()[grid.wrap(i as isize - k)])
                    .collect();
                return Ok(Field::from_values(grid, values).expect("length preserved"));
            }
        }

        let spec = dft_forward(f);
        let mut out = spec.clone();
        let m_half = (n - 1) / 2;
        for m in 1..=m_half {
            let (c, s, d) = self.mode_factor(m, tau);
            let (a, b) = (spec.cos[m], spec.sin[m]);
            out.cos[m] = d * (a * c - b * s);
            out.sin[m] = d * (a * s + b * c);
        }
        if n % 2 == 0 {
            let m = n / 2;
            let (_, _, d) = self.mode_factor(m, tau);
            out.nyquist *= d;
        }
        Ok(dft_inverse(&out, grid))
    }
}

/// Real trigonometric coefficients on the half-offset grid:
/// `f_i = cos[0] + sum_m (cos[m] c_m(x_i) + sin[m] s_m(x_i)) + nyquist * (-1)^i`.
#[derive(Debug, Clone)]
pub(crate) struct RealSpectrum {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub nyquist: f64,
}

pub(crate) fn dft_forward(f: &Field) -> RealSpectrum {
    let grid = f.grid();
    let n = grid.n_cells();
    let m_half = (n - 1) / 2;
    let mut cos = vec![0.0; m_half + 1];
    let mut sin = vec![0.0; m_half + 1];
    let values = f.values();
    cos[0] = values.iter().sum::<f64>() / n as f64;
    for m in 1..=m_half {
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let angle = math::TAU * m as f64 * grid.cell_center(i);
            a += v * math::cos(angle);
            b += v * math::sin(angle);
        }
        cos[m] = 2.0 * a / n as f64;
        sin[m] = 2.0 * b / n as f64;
    }
    let mut nyquist = 0.0;
    if n % 2 == 0 {
        // At x_i = (i + 1/2)/n the Nyquist cosine vanishes; the sine line
        // samples to (-1)^i.
        let mut acc = 0.0;
        for (i, &v) in values.iter().enumerate() {
            acc += if i % 2 == 0 { v } else { -v };
        }
        nyquist = acc / n as f64;
    }
    RealSpectrum { cos, sin, nyquist }
}

pub(crate) fn dft_inverse(spec: &RealSpectrum, grid: crate::model::TorusGrid) -> Field {
    let n = grid.n_cells();
    let m_half = (n - 1) / 2;
    let values = (0..n)
        .map(|i| {
            let x = grid.cell_center(i);
            let mut v = spec.cos[0];
            for m in 1..=m_half {
                let angle = math::TAU * m as f64 * x;
                v += spec.cos[m] * math::cos(angle) + spec.sin[m] * math::sin(angle);
            }
            if n % 2 == 0 {
                v += if i % 2 == 0 { spec.nyquist } else { -spec.nyquist };
            }
            v
        })
        .collect();
    Field::from_values(grid, values).expect("length preserved")
}

/// `L^2` projection of a field onto the band `m <= m_max` (constant plus
/// cos/sin pairs), used by the rate-function adjoint.
pub(crate) fn project_band(f: &Field, m_max: usize) -> Result<BandCoeffs, ModelError> {
    f.check_finite()?;
    let grid = f.grid();
    let n = grid.n_cells();
    let values = f.values();
    let mut c0 = 0.0;
    for &v in values {
        c0 += v;
    }
    c0 /= n as f64;
    let mut pairs = vec![[0.0; 2]; m_max];
    for m in 1..=m_max {
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let angle = math::TAU * m as f64 * grid.cell_center(i);
            a += v * math::cos(angle);
            b += v * math::sin(angle);
        }
        pairs[m - 1] = [2.0 * a / n as f64, 2.0 * b / n as f64];
    }
    Ok(BandCoeffs { c0, pairs })
}

/// Coefficients of a band-limited field: `c0 + sum_m a_m cos + b_m sin`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BandCoeffs {
    pub c0: f64,
    pub pairs: Vec<[f64; 2]>,
}

impl BandCoeffs {
    pub fn zeros(m_max: usize) -> Self {
        Self {
            c0: 0.0,
            pairs: vec![[0.0; 2]; m_max],
        }
    }
}
