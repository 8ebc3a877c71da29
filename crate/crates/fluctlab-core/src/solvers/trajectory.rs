use alloc::string::String;
use alloc::vec::Vec;

use super::SolverError;
use crate::model::{
    lp_norm, trajectory_l1_l1, trajectory_lp_norm, DeviationScale, Field, ModelError, StreamKey,
    TorusGrid,
};
use crate::math;

/// Provenance attached to a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub eps: Option<f64>,
    pub eta: f64,
    pub key: Option<StreamKey>,
    pub alpha: Option<f64>,
    pub control_id: Option<String>,
}

/// Time-indexed sequence of fields, `t_0 = 0 < ... < t_last = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<Field>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        fields: Vec<Field>,
        meta: TrajectoryMeta,
    ) -> Result<Self, SolverError> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(SolverError::BadTimes);
        }
        if times[0] != 0.0 {
            return Err(SolverError::BadTimes);
        }
        for pair in times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(SolverError::BadTimes);
            }
        }
        Ok(Self {
            times,
            fields,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> TorusGrid {
        self.fields[0].grid()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn field(&self, j: usize) -> &Field {
        &self.fields[j]
    }

    pub fn last_field(&self) -> &Field {
        self.fields.last().expect("non-empty")
    }

    /// `L^1([0,T]; L^1)` norm with left-endpoint time quadrature.
    pub fn l1_l1_norm(&self) -> Result<f64, ModelError> {
        trajectory_l1_l1(&self.times, &self.fields)
    }

    pub fn lp_lp_norm(&self, p: f64) -> Result<f64, ModelError> {
        trajectory_lp_norm(&self.times, &self.fields, p)
    }

    /// `int_0^T || u(t) - shift ||_p^p dt` (left endpoint), the raw moment
    /// used by the scaling experiments.
    pub fn time_integral_lp_pow(&self, p: f64, shift: f64) -> Result<f64, ModelError> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(ModelError::InvalidExponent(p));
        }
        let dx = self.grid().dx();
        let mut acc = 0.0;
        for j in 0..self.times.len() - 1 {
            let weight = self.times[j + 1] - self.times[j];
            self.fields[j].check_finite()?;
            let cell_sum: f64 = self.fields[j]
                .values()
                .iter()
                .map(|&v| math::pow((v - shift).abs(), p))
                .sum();
            acc += weight * dx * cell_sum;
        }
        Ok(acc)
    }

    /// `|| u(t_j) - shift ||_2^2` at one output time.
    pub fn l2_sq_at(&self, j: usize, shift: f64) -> Result<f64, ModelError> {
        self.fields[j].check_finite()?;
        let dx = self.grid().dx();
        Ok(dx
            * self.fields[j]
                .values()
                .iter()
                .map(|&v| (v - shift) * (v - shift))
                .sum::<f64>())
    }

    /// Pointwise difference of two trajectories sampled on identical grids.
    pub fn difference(&self, rhs: &Trajectory) -> Result<Trajectory, SolverError> {
        if self.times.len() != rhs.times.len()
            || self
                .times
                .iter()
                .zip(rhs.times.iter())
                .any(|(a, b)| a != b)
        {
            return Err(SolverError::TimeMismatch);
        }
        let fields = self
            .fields
            .iter()
            .zip(rhs.fields.iter())
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>, _>>()?;
        Trajectory::new(self.times.clone(), fields, TrajectoryMeta::default())
    }

    pub fn map_fields(&self, f: impl Fn(&Field) -> Field, meta: TrajectoryMeta) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            fields: self.fields.iter().map(f).collect(),
            meta,
        }
    }

    /// Conservative restriction of every field onto a coarser grid.
    pub fn restrict_to(&self, coarse: TorusGrid) -> Result<Trajectory, SolverError> {
        let fields = self
            .fields
            .iter()
            .map(|f| f.restrict_to(coarse))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trajectory {
            times: self.times.clone(),
            fields,
            meta: self.meta.clone(),
        })
    }

    /// Supremum over output times of the `L^2` norm against a reference
    /// trajectory, returning `(argmax index, sup value)`.
    pub fn sup_l2_sq_difference(&self, rhs: &Trajectory) -> Result<(usize, f64), SolverError> {
        let diff = self.difference(rhs)?;
        let mut best = (0usize, 0.0f64);
        for j in 0..diff.len() {
            let v = lp_norm(diff.field(j), 2.0)?;
            let sq = v * v;
            if sq > best.1 {
                best = (j, sq);
            }
        }
        Ok(best)
    }
}

/// Rescale a solution of the perturbed equation into the fluctuation process:
/// `(u - 1)/sqrt(eps)` without a scale, `(u - 1)/(sqrt(eps) lambda(eps))`
/// with one. Constant initial data pins the deterministic limit at 1.
pub fn derive_fluctuation(
    traj: &Trajectory,
    eps: f64,
    scale: Option<&DeviationScale>,
) -> Result<Trajectory, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::ZeroEpsilon);
    }
    let denom = match scale {
        Some(s) => math::sqrt(eps) * s.lambda(eps)?,
        None => math::sqrt(eps),
    };
    let inv = 1.0 / denom;
    let meta = TrajectoryMeta {
        eps: Some(eps),
        alpha: scale.map(|s| s.alpha()),
        ..traj.meta().clone()
    };
    Ok(traj.map_fields(|f| f.map(|v| (v - 1.0) * inv), meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid() -> TorusGrid {
        TorusGrid::new(8).unwrap()
    }

    fn simple_traj(values: &[f64]) -> Trajectory {
        let times = (0..values.len()).map(|j| j as f64 * 0.5).collect();
        let fields = values.iter().map(|&v| Field::constant(grid(), v)).collect();
        Trajectory::new(times, fields, TrajectoryMeta::default()).unwrap()
    }

    #[test]
    fn rejects_bad_time_axes() {
        let f = vec![Field::constant(grid(), 0.0); 2];
        assert!(Trajectory::new(vec![0.0, 0.0], f.clone(), TrajectoryMeta::default()).is_err());
        assert!(Trajectory::new(vec![0.5, 1.0], f.clone(), TrajectoryMeta::default()).is_err());
        assert!(Trajectory::new(vec![0.0], f, TrajectoryMeta::default()).is_err());
    }

    #[test]
    fn fluctuation_examples() {
        let traj = simple_traj(&[1.0, 1.0]);
        let v = derive_fluctuation(&traj, 0.04, None).unwrap();
        assert_eq!(v.field(0).values()[0], 0.0);

        let shifted = simple_traj(&[1.2, 1.2]);
        let eps = 0.04; // sqrt(eps) = 0.2
        let v = derive_fluctuation(&shifted, eps, None).unwrap();
        assert!((v.field(1).values()[0] - 1.0).abs() < 1e-12);

        assert!(derive_fluctuation(&traj, 0.0, None).is_err());
    }

    #[test]
    fn fluctuation_round_trips() {
        let traj = simple_traj(&[1.0, 1.37, 0.81]);
        let eps = 0.01;
        let scale = DeviationScale::new(0.25).unwrap();
        let v = derive_fluctuation(&traj, eps, Some(&scale)).unwrap();
        let denom = math::sqrt(eps) * scale.lambda(eps).unwrap();
        let back = v.map_fields(|f| f.map(|x| 1.0 + denom * x), TrajectoryMeta::default());
        for j in 0..traj.len() {
            for (a, b) in traj.field(j).values().iter().zip(back.field(j).values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn difference_requires_identical_times() {
        let a = simple_traj(&[0.0, 1.0]);
        let b = simple_traj(&[0.0, 2.0, 3.0]);
        assert!(a.difference(&b).is_err());
        let c = simple_traj(&[1.0, 1.5]);
        let d = a.difference(&c).unwrap();
        assert_eq!(d.field(1).values()[0], -0.5);
    }
}
