//! Experiment drivers and statistics for the fluctuation side: moment
//! scaling, the viscous-gap and fixed-viscosity comparisons, the
//! central-limit gap, and the weighted log-log slope fits they report.

mod experiments;
mod slope;

pub use experiments::{
    run_clt_experiment, run_h_gap, run_scaling_experiment, run_viscous_gap, CltReport,
    ExperimentEnv, GapCell, HGapPoint, HGapReport, ScalingReport, ViscousGapReport,
};
pub use slope::{fit_loglog_slope, SamplePoint, SlopeFit};

use crate::model::ModelError;
use crate::runner::ReplicateFailure;
use crate::solvers::SolverError;

/// Errors raised by slope fits and experiment drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {min} points with distinct eps, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("log-log fit needs positive finite values, got {0}")]
    NonPositiveEstimate(f64),
    #[error(transparent)]
    Replicate(#[from] ReplicateFailure),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(&'static str),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FluxModel, NoiseModel, StateFactor, TorusGrid};
    use crate::runner::SerialRunner;
    use crate::solvers::SolverConfig;

    fn small_env<'a>(
        flux: &'a FluxModel,
        noise: &'a NoiseModel,
        cfg: &'a SolverConfig,
        runner: &'a SerialRunner,
    ) -> ExperimentEnv<'a> {
        ExperimentEnv {
            grid: TorusGrid::new(32).unwrap(),
            flux,
            noise,
            cfg,
            seed: 1234,
            runner,
        }
    }

    #[test]
    fn scaling_slope_is_near_one_for_q2() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig {
            t_end: 0.5,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report =
            run_scaling_experiment(&env, 2.0, &[1e-1, 1e-2, 1e-3, 1e-4], 0.01, 48).unwrap();
        let fit = report.fit.expect("fit");
        assert!(
            fit.slope > 0.8 && fit.slope < 1.2,
            "slope {} ci [{}, {}]",
            fit.slope,
            fit.ci_lo,
            fit.ci_hi
        );
        assert!(!report.degenerate);
    }

    #[test]
    fn zero_noise_scaling_is_degenerate() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::trig(0, 0.25, 2.0, StateFactor::Additive).unwrap();
        let cfg = SolverConfig {
            t_end: 0.25,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_scaling_experiment(&env, 2.0, &[1e-1, 1e-2, 1e-3], 0.0, 4).unwrap();
        assert!(report.degenerate);
        assert!(report.fit.is_none());
        assert!(report.points.iter().all(|p| p.estimate == 0.0));
    }

    #[test]
    fn clt_gap_decreases_in_eps() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig {
            t_end: 0.5,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_clt_experiment(&env, &[1e-1, 1e-2, 1e-3], 32).unwrap();
        let e = &report.points;
        assert!(e[0].estimate > e[2].estimate, "{e:?}");
        assert!(report.limit_scale.estimate > 0.0);
    }

    #[test]
    fn zero_noise_clt_gap_is_zero() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::trig(0, 0.25, 2.0, StateFactor::Additive).unwrap();
        let cfg = SolverConfig {
            t_end: 0.25,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_clt_experiment(&env, &[1e-1, 1e-2, 1e-3], 4).unwrap();
        for p in &report.points {
            assert_eq!(p.estimate, 0.0);
        }
    }

    #[test]
    fn viscous_gap_eta_zero_column_vanishes_without_refinement() {
        // With refine = 1 the eta = 0 run is the reference itself.
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig {
            t_end: 0.25,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_viscous_gap(&env, &[1e-1, 1e-2], &[0.0, 0.05], 6, 1).unwrap();
        for cell in report.nonlinear.iter().filter(|c| c.eta == 0.0) {
            assert_eq!(cell.mean, 0.0, "{cell:?}");
        }
        // And the linear eta = 0 gap is identically zero, too.
        assert_eq!(report.linear[0].mean, 0.0);
        assert!(report.linear[1].mean > 0.0);
    }

    #[test]
    fn linear_gap_decreases_in_eta() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig {
            t_end: 0.5,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_viscous_gap(&env, &[1e-2], &[0.1, 0.03, 0.01], 12, 2).unwrap();
        let lin = &report.linear;
        assert!(
            lin[0].mean > lin[1].mean && lin[1].mean > lin[2].mean,
            "{lin:?}"
        );
        // Nonlinear sup over eps should also trend down within noise.
        let sup = &report.sup_nonlinear;
        assert!(sup[0].1 > sup[2].1, "{sup:?}");
    }

    #[test]
    fn h_gap_slope_is_near_one() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig {
            t_end: 0.5,
            output_stride: 8,
            ..SolverConfig::default()
        };
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        let report = run_h_gap(&env, 0.05, &[1e-1, 1e-2, 1e-3], 48).unwrap();
        let fit = report.fit.expect("fit");
        assert!(
            fit.slope > 0.7 && fit.slope < 1.3,
            "slope {} points {:?}",
            fit.slope,
            report.points
        );
        // Shrinking eps by 100 must shrink the gap by at least 4.
        let first = report.points.first().unwrap().sup_gap;
        let last = report.points.last().unwrap().sup_gap;
        assert!(first / last >= 4.0, "ratio {}", first / last);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let flux = FluxModel::burgers();
        let noise = NoiseModel::default_model();
        let cfg = SolverConfig::default();
        let runner = SerialRunner;
        let env = small_env(&flux, &noise, &cfg, &runner);
        assert!(run_scaling_experiment(&env, 1.5, &[0.1, 0.01, 0.001], 0.0, 2).is_err());
        assert!(run_scaling_experiment(&env, 2.0, &[], 0.0, 2).is_err());
        assert!(run_h_gap(&env, 0.0, &[0.1, 0.01, 0.001], 2).is_err());
        assert!(run_clt_experiment(&env, &[2.0], 2).is_err());
    }
}
