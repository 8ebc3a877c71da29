//! Domain types: periodic grid and fields, flux and noise models, deviation
//! scales, Cameron-Martin controls, keyed Wiener increments, and the norms
//! and hypothesis-bound checks built on top of them.

mod control;
mod flux;
mod grid;
mod noise;
mod norms;
mod scale;
mod wiener;

pub use control::Control;
pub use flux::{eval_psi, FluxKind, FluxModel};
pub use grid::{Field, TorusGrid};
pub use noise::{
    verify_hypothesis_bounds, BasisTable, HypothesisReport, NoiseModel, SampleBox, StateFactor,
};
pub use norms::{kinetic_distance, lp_norm, trajectory_l1_l1, trajectory_lp_norm};
pub use scale::DeviationScale;
pub use wiener::{StreamKey, WienerPath};

/// Errors raised while constructing or evaluating domain objects.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("grid needs at least {min} cells, got {got}")]
    GridTooCoarse { got: usize, min: usize },
    #[error("field has {got} values but the grid has {expected} cells")]
    FieldLength { got: usize, expected: usize },
    #[error("grid mismatch: {left} vs {right} cells")]
    GridMismatch { left: usize, right: usize },
    #[error("{left} cells do not refine onto {right} cells")]
    BadRefinement { left: usize, right: usize },
    #[error("non-finite value {value} at cell {cell}")]
    NonFinite { cell: usize, value: f64 },
    #[error("mode index {k} out of range 1..={max}")]
    ModeOutOfRange { k: usize, max: usize },
    #[error("norm exponent must be >= 1 and finite, got {0}")]
    InvalidExponent(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("deviation exponent alpha must lie in (0, 1/2), got {0}")]
    InvalidAlpha(f64),
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("flux polynomial needs at least one coefficient")]
    EmptyPolynomial,
    #[error("control shape mismatch: {0}")]
    ControlShape(&'static str),
    #[error("trajectory norm needs as many times as fields and at least one sample")]
    TrajectoryShape,
}
