use super::{Field, ModelError};
use crate::math;

/// `L^p` norm of a cell-averaged field on the unit torus,
/// `(dx * sum |u_i|^p)^{1/p}` for `p >= 1`. Non-finite fields are rejected.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64, ModelError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ModelError::InvalidExponent(p));
    }
    f.check_finite()?;
    let dx = f.grid().dx();
    let values = f.values();
    if p == 1.0 {
        return Ok(dx * values.iter().map(|v| v.abs()).sum::<f64>());
    }
    if p == 2.0 {
        return Ok(math::sqrt(dx * values.iter().map(|v| v * v).sum::<f64>()));
    }
    let sum: f64 = values.iter().map(|v| math::pow(v.abs(), p)).sum();
    Ok(math::pow(dx * sum, 1.0 / p))
}

/// Distance computed through the kinetic bracket: per cell, the kinetic
/// functions `f = I_{u > xi}` and conjugate `bar f = 1 - f` satisfy
///
/// ```text
///   int_R I_{u > xi} (1 - I_{v > xi}) d xi = (u - v)^+ ,
///   int_R (1 - I_{u > xi}) I_{v > xi} d xi = (u - v)^- ,
/// ```
///
/// each integral being the length of the interval between the two states.
/// Summing both brackets over cells gives exactly the `L^1` distance, which
/// is the identity the tests pin down.
pub fn kinetic_distance(u: &Field, v: &Field) -> Result<f64, ModelError> {
    u.check_same_grid(v)?;
    u.check_finite()?;
    v.check_finite()?;
    let mut acc = 0.0;
    for (&a, &b) in u.values().iter().zip(v.values()) {
        // Measure of {xi : b <= xi < a} and of {xi : a <= xi < b}.
        let up = (a - b).max(0.0);
        let down = (b - a).max(0.0);
        acc += up + down;
    }
    Ok(u.grid().dx() * acc)
}

/// `L^p([0,T]; L^p)` norm of a sampled trajectory with left-endpoint time
/// quadrature: `(sum_j (t_{j+1} - t_j) ||u(t_j)||_p^p)^{1/p}`.
pub fn trajectory_lp_norm(times: &[f64], fields: &[Field], p: f64) -> Result<f64, ModelError> {
    if times.len() != fields.len() || times.is_empty() {
        return Err(ModelError::TrajectoryShape);
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ModelError::InvalidExponent(p));
    }
    let mut acc = 0.0;
    for j in 0..times.len() - 1 {
        let weight = times[j + 1] - times[j];
        let norm = lp_norm(&fields[j], p)?;
        acc += weight * math::pow(norm, p);
    }
    Ok(math::pow(acc, 1.0 / p))
}

/// `L^1([0,T]; L^1)` trajectory norm.
pub fn trajectory_l1_l1(times: &[f64], fields: &[Field]) -> Result<f64, ModelError> {
    trajectory_lp_norm(times, fields, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TorusGrid;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(32).unwrap()
    }

    #[test]
    fn unit_field_has_unit_norm_for_every_p() {
        let f = Field::constant(grid(), 1.0);
        for &p in &[1.0, 2.0, 3.0, 7.5] {
            assert!((lp_norm(&f, p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cube_root_example() {
        let f = Field::constant(grid(), -2.0);
        assert!((lp_norm(&f, 3.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn l2_matches_rms() {
        let f = Field::from_fn(grid(), |x| math::sin(math::TAU * x) + 0.3);
        let rms = math::sqrt(
            f.values().iter().map(|v| v * v).sum::<f64>() / f.grid().n_cells() as f64,
        );
        assert!((lp_norm(&f, 2.0).unwrap() - rms).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = Field::constant(grid(), 1.0);
        assert!(lp_norm(&f, 0.5).is_err());
        let mut g = f.clone();
        g.values_mut()[0] = f64::INFINITY;
        assert!(lp_norm(&g, 1.0).is_err());
        let other = Field::constant(TorusGrid::new(16).unwrap(), 1.0);
        assert!(kinetic_distance(&f, &other).is_err());
    }

    #[test]
    fn kinetic_distance_examples() {
        let u = Field::constant(grid(), 2.0);
        let v = Field::constant(grid(), 0.5);
        assert!((kinetic_distance(&u, &v).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(kinetic_distance(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn trajectory_norm_left_endpoint() {
        let g = grid();
        let times = [0.0, 0.25, 1.0];
        let fields = [
            Field::constant(g, 2.0),
            Field::constant(g, 4.0),
            Field::constant(g, 100.0), // final sample carries no weight
        ];
        let got = trajectory_l1_l1(&times, &fields).unwrap();
        assert!((got - (0.25 * 2.0 + 0.75 * 4.0)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn kinetic_bracket_equals_l1(values_u in proptest::collection::vec(-50.0f64..50.0, 32),
                                     values_v in proptest::collection::vec(-50.0f64..50.0, 32)) {
            let u = Field::from_values(grid(), values_u).unwrap();
            let v = Field::from_values(grid(), values_v).unwrap();
            let bracket = kinetic_distance(&u, &v).unwrap();
            let direct = lp_norm(&u.sub(&v).unwrap(), 1.0).unwrap();
            prop_assert!((bracket - direct).abs() <= 1e-12);
        }

        #[test]
        fn lp_norm_scales_homogeneously(c in -10.0f64..10.0,
                                        values in proptest::collection::vec(-5.0f64..5.0, 32)) {
            let f = Field::from_values(grid(), values.clone()).unwrap();
            let scaled = Field::from_values(grid(), values.iter().map(|v| c * v).collect::<Vec<_>>()).unwrap();
            let a = lp_norm(&scaled, 2.0).unwrap();
            let b = c.abs() * lp_norm(&f, 2.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }
}
