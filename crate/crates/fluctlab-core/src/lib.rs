//! Simulation core for scalar conservation laws with small stochastic forcing
//! on the one-dimensional unit torus.
//!
//! The crate provides the building blocks to simulate
//!
//! ```text
//!     du + div A(u) dt = sqrt(eps) * Phi(u) dW,      u(x, 0) = 1,
//! ```
//!
//! together with its viscous regularisations, the linear equation solved by
//! the rescaled fluctuation `(u - 1)/sqrt(eps)` in the small-noise limit, the
//! deterministic skeleton equation driven by a Cameron-Martin control, and the
//! quadratic least-action rate function attached to the moderate-deviation
//! regime `(u - 1)/(sqrt(eps) * lambda(eps))`.
//!
//! Layout:
//!
//! * [`model`] — grid, fields, flux and noise models, deviation scales,
//!   controls, keyed Wiener increments, norms and bound checks.
//! * [`solvers`] — finite-volume/Euler-Maruyama splitting steppers for the
//!   nonlinear equations (deterministic, viscous, stochastic, controlled).
//! * [`limits`] — exact spectral solvers for the linear limit objects
//!   (stochastic convolution and skeleton) sharing one incremental engine.
//! * [`analysis`] — Monte Carlo experiment drivers and log-log slope fits for
//!   the fluctuation-scaling statements.
//! * [`mdp`] — rate-function evaluation as a least-norm control problem,
//!   skeleton-continuity and controlled-convergence experiments, and
//!   importance-sampled rare-event probabilities.
//! * [`runner`] — replicate fan-out abstraction; parallel execution is
//!   supplied by the host crate, reduction order is fixed.
//!
//! The crate is `no_std` (it allocates, but performs no IO); all floating
//! point transcendentals go through `libm` so results do not depend on the
//! platform's libm.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub(crate) mod math;

pub mod analysis;
pub mod limits;
pub mod mdp;
pub mod model;
pub mod runner;
pub mod solvers;
