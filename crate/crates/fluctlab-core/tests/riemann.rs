//! Burgers Riemann problems on the torus against exact entropy solutions.
//!
//! Periodic data necessarily carries two waves: a step down produces the
//! tracked shock plus a rarefaction at the wrap, and vice versa. The exact
//! profiles below account for both; at `t = 0.5` the waves have not yet
//! interacted.

use fluctlab_core::model::{Field, FluxModel, TorusGrid};
use fluctlab_core::solvers::{
    solve_deterministic, solve_viscous_deterministic, SolverConfig, Trajectory,
};

const T_END: f64 = 0.5;

fn grid() -> TorusGrid {
    TorusGrid::new(128).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig {
        t_end: T_END,
        range_margin: 0.5,
        ..SolverConfig::default()
    }
}

/// Data `u = 1` on `[0, 1/2)`, `u = 0` on `[1/2, 1)`: shock from `x = 1/2`
/// at speed `1/2`, rarefaction fan opening at the wrap `x = 0`.
fn exact_step_down(x: f64, t: f64) -> f64 {
    let shock = 0.5 + 0.5 * t;
    if x <= t {
        x / t
    } else if x < shock {
        1.0
    } else {
        0.0
    }
}

/// Data `u = 0` on `[0, 1/2)`, `u = 1` on `[1/2, 1)`: fan centered at
/// `x = 1/2`, shock from the wrap moving right at speed `1/2`.
fn exact_step_up(x: f64, t: f64) -> f64 {
    let shock = 0.5 * t;
    if x < shock {
        1.0
    } else if x < 0.5 {
        0.0
    } else if x <= 0.5 + t {
        (x - 0.5) / t
    } else {
        1.0
    }
}

fn l1_error(traj: &Trajectory, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = traj.grid();
    let f = traj.last_field();
    let t = traj.t_end();
    g.dx()
        * f.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - exact(g.cell_center(i), t)).abs())
            .sum::<f64>()
}

/// Midpoint of the numerical jump: the 1/2-level crossing of the decreasing
/// profile, restricted to `x` beyond the fan head.
fn shock_position(traj: &Trajectory) -> f64 {
    let g = traj.grid();
    let f = traj.last_field();
    let n = g.n_cells();
    let fan_head = traj.t_end() + 0.05;
    for i in 0..n {
        let x = g.cell_center(i);
        if x <= fan_head {
            continue;
        }
        let (a, b) = (f.values()[i], f.values()[(i + 1) % n]);
        if a >= 0.5 && b < 0.5 {
            // Linear interpolation between cell centers.
            return x + g.dx() * (a - 0.5) / (a - b);
        }
    }
    panic!("no shock found");
}

fn step_down_data() -> Field {
    Field::from_fn(grid(), |x| if x < 0.5 { 1.0 } else { 0.0 })
}

fn step_up_data() -> Field {
    Field::from_fn(grid(), |x| if x < 0.5 { 0.0 } else { 1.0 })
}

#[test]
fn shock_travels_at_rankine_hugoniot_speed() {
    let traj = solve_deterministic(&step_down_data(), &FluxModel::burgers(), &cfg()).unwrap();
    let pos = shock_position(&traj);
    let expected = 0.5 + 0.5 * T_END;
    let dx = grid().dx();
    assert!(
        (pos - expected).abs() <= 2.0 * dx,
        "shock at {pos}, expected {expected} (+- {})",
        2.0 * dx
    );
}

#[test]
fn shock_profile_l1_error_is_small() {
    let traj = solve_deterministic(&step_down_data(), &FluxModel::burgers(), &cfg()).unwrap();
    let err = l1_error(&traj, exact_step_down);
    assert!(err <= 5.0 * grid().dx(), "L1 error {err}");
}

#[test]
fn rarefaction_matches_self_similar_profile() {
    let traj = solve_deterministic(&step_up_data(), &FluxModel::burgers(), &cfg()).unwrap();
    let err = l1_error(&traj, exact_step_up);
    assert!(err <= 5.0 * grid().dx(), "L1 error {err}");
}

#[test]
fn lax_friedrichs_also_converges_but_is_more_diffusive() {
    use fluctlab_core::solvers::Scheme;
    let eo = solve_deterministic(&step_down_data(), &FluxModel::burgers(), &cfg()).unwrap();
    let lf_cfg = SolverConfig {
        scheme: Scheme::LaxFriedrichs,
        ..cfg()
    };
    let lf = solve_deterministic(&step_down_data(), &FluxModel::burgers(), &lf_cfg).unwrap();
    let err_eo = l1_error(&eo, exact_step_down);
    let err_lf = l1_error(&lf, exact_step_down);
    // Classical LF dissipates with lambda = dx/dt >> max|a|; it converges but
    // is only the fallback scheme, so just pin sanity and the ordering.
    assert!(err_lf <= 20.0 * grid().dx(), "LF L1 error {err_lf}");
    assert!(err_eo <= err_lf, "EO {err_eo} should beat LF {err_lf}");
}

#[test]
fn vanishing_viscosity_approaches_the_inviscid_solution() {
    let inviscid = solve_deterministic(&step_down_data(), &FluxModel::burgers(), &cfg()).unwrap();
    let mut prev = f64::INFINITY;
    for eta in [0.02, 0.005, 0.00125] {
        let viscous = solve_viscous_deterministic(
            &step_down_data(),
            &FluxModel::burgers(),
            &SolverConfig {
                viscosity: eta,
                ..cfg()
            },
        )
        .unwrap();
        // Compare terminal profiles; the time grids differ across eta.
        let dist = grid().dx()
            * viscous
                .last_field()
                .values()
                .iter()
                .zip(inviscid.last_field().values())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(dist < prev, "eta={eta}: distance {dist} not below {prev}");
        prev = dist;
    }
}
