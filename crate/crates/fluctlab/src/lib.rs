//! Host crate for the fluctuation laboratory: configuration loading and
//! validation, parallel replicate execution, file emission (CSV, JSON
//! summaries, SVG plots), run manifests, and the command-line surface.
//!
//! All simulation lives in `fluctlab-core`; this crate owns every side
//! effect. Determinism contract: a `(config, seed)` pair maps to
//! byte-identical output files at any parallelism.

pub mod cli;
pub mod config;
pub mod emit;
pub mod manifest;
pub mod parallel;

pub use config::Config;
