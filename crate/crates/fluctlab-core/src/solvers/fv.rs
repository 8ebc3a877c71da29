use super::config::Scheme;
use crate::model::FluxModel;

/// Interface flux for the conservative update
/// `u_i <- u_i - dt/dx (F_{i+1/2} - F_{i-1/2})`.
///
/// Engquist-Osher: `F(a, b) = A(0) + int_0^a max(a', 0) + int_0^b min(a', 0)`,
/// monotone under the CFL bound and consistent, `F(u, u) = A(u)`.
/// Lax-Friedrichs: `F(a, b) = (A(a) + A(b))/2 - lambda (b - a)/2` with
/// `lambda = dx/dt`.
pub(crate) struct FluxKernel<'a> {
    flux: &'a FluxModel,
    scheme: Scheme,
    flux_at_zero: f64,
    /// `dx / dt`, the Lax-Friedrichs dissipation coefficient.
    lambda: f64,
}

impl<'a> FluxKernel<'a> {
    pub fn new(flux: &'a FluxModel, scheme: Scheme, lambda: f64) -> Self {
        Self {
            flux,
            scheme,
            flux_at_zero: flux.flux_at_zero(),
            lambda,
        }
    }

    #[inline]
    pub fn interface(&self, left: f64, right: f64) -> f64 {
        match self.scheme {
            Scheme::EngquistOsher => {
                self.flux_at_zero + self.flux.eo_positive(left) + self.flux.eo_negative(right)
            }
            Scheme::LaxFriedrichs => {
                0.5 * (self.flux.eval(left) + self.flux.eval(right))
                    - 0.5 * self.lambda * (right - left)
            }
        }
    }
}

/// One conservative transport step, periodic in space. `fluxes[i]` holds
/// `F_{i+1/2}`; the two passes keep each interface value computed once so
/// the cell updates telescope.
pub(crate) fn flux_step(u: &mut [f64], fluxes: &mut [f64], kernel: &FluxKernel<'_>, r: f64) {
    let n = u.len();
    for i in 0..n {
        let right = u[(i + 1) % n];
        fluxes[i] = kernel.interface(u[i], right);
    }
    for i in 0..n {
        let left_flux = fluxes[(i + n - 1) % n];
        u[i] -= r * (fluxes[i] - left_flux);
    }
}

/// Explicit centered diffusion step, `u_i += nu_r ((u_{i+1} - 2 u_i) + u_{i-1})`
/// with `nu_r = eta dt / dx^2`. The operand order keeps constants exact.
pub(crate) fn diffusion_step(u: &mut [f64], scratch: &mut [f64], nu_r: f64) {
    let n = u.len();
    for i in 0..n {
        let up = u[(i + 1) % n];
        let down = u[(i + n - 1) % n];
        scratch[i] = u[i] + nu_r * ((up - 2.0 * u[i]) + down);
    }
    u.copy_from_slice(scratch);
}
