//! JSON configuration: one document with sections
//! `{grid, flux, noise, scale, solver, experiment}` plus the master seed.
//! Unknown fields are rejected and semantic errors carry the offending
//! section path.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use fluctlab_core::mdp::{EventFunctional, EventSpec};
use fluctlab_core::model::{
    Control, DeviationScale, FluxModel, NoiseModel, SampleBox, StateFactor, TorusGrid,
};
use fluctlab_core::solvers::SolverConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("config parse error at {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid config at {section}: {reason}")]
    Invalid { section: String, reason: String },
}

fn invalid(section: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        section: section.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub grid: GridSection,
    pub flux: FluxSection,
    pub noise: NoiseSection,
    pub scale: ScaleSection,
    pub solver: SolverConfig,
    pub experiment: ExperimentSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            grid: GridSection::default(),
            flux: FluxSection::default(),
            noise: NoiseSection::default(),
            scale: ScaleSection::default(),
            solver: SolverConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_cells: 128 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FluxSection {
    /// `burgers` or `polynomial`.
    pub kind: String,
    /// Polynomial coefficients, low to high (used when kind = polynomial).
    pub coefficients: Vec<f64>,
    /// Optional overrides for the declared Hypothesis-H constants.
    pub growth_exponent: Option<f64>,
    pub growth_constant: Option<f64>,
}

impl Default for FluxSection {
    fn default() -> Self {
        Self {
            kind: "burgers".into(),
            coefficients: Vec::new(),
            growth_exponent: None,
            growth_constant: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub n_modes: usize,
    pub gamma0: f64,
    pub decay: f64,
    pub factor: StateFactor,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            n_modes: 8,
            gamma0: 0.25,
            decay: 2.0,
            factor: StateFactor::Additive,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleSection {
    pub alpha: f64,
}

impl Default for ScaleSection {
    fn default() -> Self {
        Self { alpha: 0.25 }
    }
}

/// One mode line of a configured control, sampled at time-cell midpoints.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlEntry {
    /// 1-based mode index.
    pub mode: usize,
    /// `constant`, `ramp_down`, or `ramp_up`.
    #[serde(default = "default_profile")]
    pub profile: String,
    pub amplitude: f64,
}

fn default_profile() -> String {
    "constant".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub hypothesis: HypothesisSection,
    pub scaling: ScalingSection,
    pub clt: CltSection,
    pub gaps: GapsSection,
    pub skeleton: SkeletonSection,
    pub rate: RateSection,
    pub mdp: MdpSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            hypothesis: HypothesisSection::default(),
            scaling: ScalingSection::default(),
            clt: CltSection::default(),
            gaps: GapsSection::default(),
            skeleton: SkeletonSection::default(),
            rate: RateSection::default(),
            mdp: MdpSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisSection {
    pub samples: usize,
    /// States and flux arguments are drawn from `[-box, box]`.
    pub state_box: f64,
    pub flux_box: f64,
}

impl Default for HypothesisSection {
    fn default() -> Self {
        Self {
            samples: 4096,
            state_box: 3.0,
            flux_box: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub q: f64,
    pub eps_grid: Vec<f64>,
    pub eta: f64,
    pub replicates: u32,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            q: 2.0,
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4],
            eta: 0.01,
            replicates: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CltSection {
    pub eps_grid: Vec<f64>,
    pub replicates: u32,
}

impl Default for CltSection {
    fn default() -> Self {
        Self {
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4],
            replicates: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GapsSection {
    pub eps_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub replicates: u32,
    /// Spatial refinement of the inviscid reference run.
    pub refine: usize,
    /// Fixed-viscosity study parameters.
    pub h_eta: f64,
    pub h_eps_grid: Vec<f64>,
    pub h_replicates: u32,
    pub h_stride: usize,
}

impl Default for GapsSection {
    fn default() -> Self {
        Self {
            eps_grid: vec![1e-1, 1e-2],
            eta_grid: vec![0.1, 0.03, 0.01],
            replicates: 64,
            refine: 2,
            h_eta: 0.05,
            h_eps_grid: vec![1e-1, 1e-2, 1e-3],
            h_replicates: 200,
            h_stride: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonSection {
    pub steps: usize,
    pub eta: f64,
    pub stride: usize,
    pub control: Vec<ControlEntry>,
}

impl Default for SkeletonSection {
    fn default() -> Self {
        Self {
            steps: 256,
            eta: 0.0,
            stride: 1,
            control: vec![
                ControlEntry {
                    mode: 1,
                    profile: "constant".into(),
                    amplitude: 1.0,
                },
                ControlEntry {
                    mode: 2,
                    profile: "constant".into(),
                    amplitude: 0.5,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub control_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Control generating the recovery target.
    pub generator: Vec<ControlEntry>,
    pub event_functional: EventFunctional,
    pub event_threshold: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            control_steps: 32,
            tol: 1e-8,
            max_iter: 4000,
            generator: vec![ControlEntry {
                mode: 2,
                profile: "constant".into(),
                amplitude: 0.8,
            }],
            event_functional: EventFunctional::TerminalL1Norm,
            event_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionBSection {
    pub m_list: Vec<u32>,
    pub mode: usize,
    pub amplitude: f64,
    pub ball: f64,
    pub steps: usize,
}

impl Default for ConditionBSection {
    fn default() -> Self {
        Self {
            m_list: vec![2, 4, 8, 16, 32, 64],
            mode: 2,
            amplitude: 0.5,
            ball: 16.0,
            steps: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSection {
    pub eps_grid: Vec<f64>,
    pub replicates: u32,
    /// Condition-(a) gap threshold.
    pub delta: f64,
    pub event_functional: EventFunctional,
    pub event_threshold: f64,
    pub importance_sampling: bool,
    /// Deterministic control family for condition (a).
    pub control: Vec<ControlEntry>,
    pub control_steps: usize,
    pub condition_b: ConditionBSection,
}

impl Default for MdpSection {
    fn default() -> Self {
        Self {
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4],
            replicates: 200,
            delta: 0.1,
            event_functional: EventFunctional::TerminalL1Norm,
            event_threshold: 0.25,
            importance_sampling: true,
            control: vec![ControlEntry {
                mode: 1,
                profile: "constant".into(),
                amplitude: 1.0,
            }],
            control_steps: 16,
            condition_b: ConditionBSection::default(),
        }
    }
}

impl Config {
    /// Load from a file path; the literal `default` yields the built-in
    /// configuration.
    pub fn load(path: &str) -> Result<Self, ConfigError> {
        if path == "default" {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(Path::new(path)).map_err(|e| ConfigError::Io {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::Parse {
                path: path.to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic validation: every section must build its core object.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.build_grid()?;
        self.build_flux()?;
        self.build_noise()?;
        self.build_scale()?;
        self.solver
            .validate()
            .map_err(|e| invalid("solver", e))?;
        let exp = &self.experiment;
        if exp.gaps.refine == 0 {
            return Err(invalid("experiment.gaps.refine", "must be >= 1"));
        }
        if exp.skeleton.steps == 0 || exp.rate.control_steps == 0 || exp.mdp.control_steps == 0 {
            return Err(invalid("experiment", "time-step counts must be >= 1"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<TorusGrid, ConfigError> {
        TorusGrid::new(self.grid.n_cells).map_err(|e| invalid("grid.n_cells", e))
    }

    pub fn build_flux(&self) -> Result<FluxModel, ConfigError> {
        let base = match self.flux.kind.as_str() {
            "burgers" => FluxModel::burgers(),
            "polynomial" => FluxModel::polynomial(self.flux.coefficients.clone())
                .map_err(|e| invalid("flux.coefficients", e))?,
            other => {
                return Err(invalid(
                    "flux.kind",
                    format!("unknown kind `{other}`; expected burgers or polynomial"),
                ))
            }
        };
        match (self.flux.growth_exponent, self.flux.growth_constant) {
            (None, None) => Ok(base),
            (p, c) => base
                .clone()
                .with_growth(
                    p.unwrap_or(base.growth_exponent()),
                    c.unwrap_or(base.growth_constant()),
                )
                .map_err(|e| invalid("flux", e)),
        }
    }

    pub fn build_noise(&self) -> Result<NoiseModel, ConfigError> {
        NoiseModel::trig(
            self.noise.n_modes,
            self.noise.gamma0,
            self.noise.decay,
            self.noise.factor,
        )
        .map_err(|e| invalid("noise", e))
    }

    pub fn build_scale(&self) -> Result<DeviationScale, ConfigError> {
        DeviationScale::new(self.scale.alpha).map_err(|e| invalid("scale.alpha", e))
    }

    pub fn sample_box(&self) -> SampleBox {
        SampleBox {
            state_lo: -self.experiment.hypothesis.state_box,
            state_hi: self.experiment.hypothesis.state_box,
            flux_lo: -self.experiment.hypothesis.flux_box,
            flux_hi: self.experiment.hypothesis.flux_box,
        }
    }

    pub fn mdp_event(&self) -> EventSpec {
        EventSpec {
            functional: self.experiment.mdp.event_functional,
            threshold: self.experiment.mdp.event_threshold,
        }
    }

    pub fn rate_event(&self) -> EventSpec {
        EventSpec {
            functional: self.experiment.rate.event_functional,
            threshold: self.experiment.rate.event_threshold,
        }
    }
}

/// Build a control on a uniform grid from configured mode entries.
pub fn build_control(
    entries: &[ControlEntry],
    t_end: f64,
    steps: usize,
    n_modes: usize,
    section: &str,
) -> Result<Control, ConfigError> {
    let mut control =
        Control::zero(t_end, steps, n_modes).map_err(|e| invalid(section, e))?;
    for entry in entries {
        let amplitude = entry.amplitude;
        control = match entry.profile.as_str() {
            "constant" => control.with_mode(entry.mode, |_| amplitude),
            "ramp_down" => control.with_mode(entry.mode, |t| amplitude * (1.0 - t / t_end)),
            "ramp_up" => control.with_mode(entry.mode, |t| amplitude * (t / t_end)),
            other => {
                return Err(invalid(
                    section,
                    format!("unknown profile `{other}`; expected constant, ramp_down, or ramp_up"),
                ))
            }
        }
        .map_err(|e| invalid(section, e))?;
    }
    Ok(control)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let text = cfg.to_json_pretty();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let text = r#"{ "noise": { "n_modes": 8, "gamma_zero": 0.25 } }"#;
        match Config::from_json(text) {
            Err(ConfigError::Parse { path, .. }) => assert!(path.contains("noise")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_carry_the_section() {
        let text = r#"{ "grid": { "n_cells": 4 } }"#;
        match Config::from_json(text) {
            Err(ConfigError::Invalid { section, .. }) => assert_eq!(section, "grid.n_cells"),
            other => panic!("expected invalid error, got {other:?}"),
        }
        let text = r#"{ "scale": { "alpha": 0.7 } }"#;
        assert!(matches!(
            Config::from_json(text),
            Err(ConfigError::Invalid { .. })
        ));
        let text = r#"{ "flux": { "kind": "cubic" } }"#;
        assert!(matches!(
            Config::from_json(text),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn builds_core_objects() {
        let cfg = Config::default();
        assert_eq!(cfg.build_grid().unwrap().n_cells(), 128);
        assert_eq!(cfg.build_noise().unwrap().n_modes(), 8);
        let flux = cfg.build_flux().unwrap();
        assert_eq!(flux.derivative(2.0), 2.0);
        assert_eq!(cfg.build_scale().unwrap().alpha(), 0.25);
    }

    #[test]
    fn control_profiles() {
        let entries = vec![
            ControlEntry {
                mode: 1,
                profile: "constant".into(),
                amplitude: 2.0,
            },
            ControlEntry {
                mode: 2,
                profile: "ramp_down".into(),
                amplitude: 1.0,
            },
        ];
        let c = build_control(&entries, 1.0, 4, 4, "test").unwrap();
        assert_eq!(c.coeff(0, 0), 2.0);
        assert_eq!(c.coeff(3, 0), 2.0);
        assert!(c.coeff(0, 1) > c.coeff(3, 1));
        let bad = vec![ControlEntry {
            mode: 1,
            profile: "spike".into(),
            amplitude: 1.0,
        }];
        assert!(build_control(&bad, 1.0, 4, 4, "test").is_err());
    }
}
