//! Moderate-deviation machinery: the variational rate function evaluated as
//! a least-norm control problem over the skeleton map, norm super-level
//! events and their rates, the two convergence experiments behind the
//! deviation principle, and importance-sampled rare-event probabilities.

mod experiments;
mod rate;

pub use experiments::{
    estimate_mdp_probability, run_condition_a, run_condition_b, ConditionAReport, ConditionARow,
    ConditionBReport, MdpProbReport, MdpProbRow,
};
pub use rate::{EventRate, RateProblem, RateResult, RateTarget};

use crate::model::{lp_norm, ModelError};
use crate::runner::ReplicateFailure;
use crate::solvers::{SolverError, Trajectory};

/// Norm functional defining an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventFunctional {
    /// `|| X(T) ||_{L^1}`.
    #[cfg_attr(feature = "serde", serde(rename = "terminal_l1_norm"))]
    TerminalL1Norm,
    /// `|| X ||_{L^1([0,T]; L^1)}`.
    #[cfg_attr(feature = "serde", serde(rename = "trajectory_l1l1_norm"))]
    TrajectoryL1L1Norm,
}

/// The closed event `{ trajectories : functional >= threshold }`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventSpec {
    pub functional: EventFunctional,
    pub threshold: f64,
}

impl EventSpec {
    pub fn validate(&self) -> Result<(), MdpError> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(MdpError::TargetGrid(
                "event threshold must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// The functional's value on a trajectory.
    pub fn evaluate(&self, traj: &Trajectory) -> Result<f64, ModelError> {
        match self.functional {
            EventFunctional::TerminalL1Norm => lp_norm(traj.last_field(), 1.0),
            EventFunctional::TrajectoryL1L1Norm => traj.l1_l1_norm(),
        }
    }

    pub fn is_hit(&self, traj: &Trajectory) -> Result<bool, ModelError> {
        Ok(self.evaluate(traj)? >= self.threshold)
    }
}

/// Errors raised by the rate solver and deviation experiments.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Replicate(#[from] ReplicateFailure),
    #[error("rate problem input: {0}")]
    TargetGrid(&'static str),
    #[error("control leaves the energy ball: int ||hdot||^2 = {energy2:e} > N = {ball:e}")]
    LeavesBall { energy2: f64, ball: f64 },
}
