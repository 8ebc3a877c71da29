//! Float math routed through `libm` so the crate works without `std` and
//! produces identical bits on every platform.

pub(crate) use libm::{ceil, cos, exp, floor, log as ln, pow, round, sin, sqrt};

pub(crate) const TAU: f64 = core::f64::consts::TAU;
