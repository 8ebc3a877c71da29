//! Command-line surface. Subcommands map one-to-one onto the experiment
//! drivers; every run writes its manifest before any result file and all
//! outputs are byte-stable for a fixed `(config, seed)` at any parallelism.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 configuration/usage error.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use fluctlab_core::analysis::{
    run_clt_experiment, run_h_gap, run_scaling_experiment, run_viscous_gap, ExperimentEnv,
    SlopeFit,
};
use fluctlab_core::limits::{solve_skeleton, SpectralPropagator};
use fluctlab_core::mdp::{
    estimate_mdp_probability, run_condition_a, run_condition_b, RateProblem, RateTarget,
};
use fluctlab_core::model::{
    kinetic_distance, lp_norm, verify_hypothesis_bounds, Control, Field, StreamKey, WienerPath,
};
use fluctlab_core::runner::{ReplicateRunner as _, SerialRunner};
use fluctlab_core::solvers::{
    plan_time_grid, solve_deterministic, solve_spde, TimeGrid, Trajectory,
};

use crate::config::{build_control, Config, ConfigError};
use crate::emit::{emit_csv, emit_summary_json, emit_svg_plot, PlotSeries, Table};
use crate::manifest::RunManifest;
use crate::parallel::{with_pool, RayonRunner};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPERIMENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fluctlab",
    version,
    about = "Simulation laboratory for small-noise scalar conservation laws on the torus"
)]
pub struct Cli {
    /// Path to a JSON config, or the literal `default`.
    #[arg(long, global = true, default_value = "default")]
    pub config: String,
    /// Master seed; overrides FLUCTLAB_SEED and the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override every replicate count for this run.
    #[arg(long, global = true)]
    pub replicates: Option<u32>,
    /// Worker threads; 0 uses the rayon default. Results never depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub parallel: usize,
    /// Rewrite the manifest with measured wall time (not byte-reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirically verify the declared flux/noise bound constants.
    CheckHyp,
    /// Moment-scaling slopes of the perturbed equation.
    Scaling,
    /// Coupled-path gap between the rescaled fluctuation and its linear limit.
    Clt,
    /// Viscous-gap and fixed-viscosity comparisons.
    Gaps,
    /// Solve the skeleton equation for the configured control and dump it.
    Skeleton,
    /// Least-norm rate function: recovery of a generating control and the
    /// rate of the configured norm event.
    Rate,
    /// Moderate-deviation suite: conditions (a)/(b) and event probabilities.
    Mdp,
    /// Fast invariant suite; exits nonzero on any failure.
    Selftest,
}

#[derive(Debug)]
enum RunError {
    Config(ConfigError),
    Experiment(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Experiment(format!("io: {e}"))
    }
}

macro_rules! experiment_error {
    ($($from:ty),*) => {$(
        impl From<$from> for RunError {
            fn from(e: $from) -> Self {
                RunError::Experiment(e.to_string())
            }
        }
    )*};
}
experiment_error!(
    fluctlab_core::analysis::AnalysisError,
    fluctlab_core::mdp::MdpError,
    fluctlab_core::solvers::SolverError,
    fluctlab_core::model::ModelError
);

/// Parse arguments, run, and return the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help/--version.
        Err(e) => e.exit(),
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(RunError::Experiment(e)) => {
            eprintln!("experiment failed: {e}");
            EXIT_EXPERIMENT
        }
    }
}

fn resolve_seed(cli: &Cli, config: &Config) -> Result<u64, RunError> {
    if let Some(seed) = cli.seed {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var("FLUCTLAB_SEED") {
        return text.trim().parse::<u64>().map_err(|_| {
            RunError::Config(ConfigError::Invalid {
                section: "FLUCTLAB_SEED".into(),
                reason: format!("`{text}` is not a u64"),
            })
        });
    }
    Ok(config.seed)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let mut config = Config::load(&cli.config)?;
    let seed = resolve_seed(cli, &config)?;
    config.seed = seed;
    if let Some(reps) = cli.replicates {
        let exp = &mut config.experiment;
        exp.scaling.replicates = reps;
        exp.clt.replicates = reps;
        exp.gaps.replicates = reps;
        exp.gaps.h_replicates = reps;
        exp.mdp.replicates = reps;
    }
    std::fs::create_dir_all(&cli.out)?;
    let started = Instant::now();
    with_pool(cli.parallel, || dispatch(cli, &config))?;
    if cli.timings {
        eprintln!("wall clock: {:.3}s", started.elapsed().as_secs_f64());
    }
    Ok(())
}

fn dispatch(cli: &Cli, config: &Config) -> Result<(), RunError> {
    match cli.command {
        Command::CheckHyp => cmd_check_hyp(cli, config),
        Command::Scaling => cmd_scaling(cli, config),
        Command::Clt => cmd_clt(cli, config),
        Command::Gaps => cmd_gaps(cli, config),
        Command::Skeleton => cmd_skeleton(cli, config),
        Command::Rate => cmd_rate(cli, config),
        Command::Mdp => cmd_mdp(cli, config),
        Command::Selftest => cmd_selftest(),
    }
}

fn write_manifest(
    cli: &Cli,
    config: &Config,
    experiment: &str,
    parameters: serde_json::Value,
    outputs: &[&str],
    replicates: u64,
) -> Result<RunManifest, RunError> {
    let mut manifest = RunManifest::new(experiment, config, config.seed, parameters, outputs, replicates);
    if cli.timings {
        // Opt-in, documented as non-reproducible: the manifest is rewritten
        // with the measured time by the caller.
        manifest.wall_clock_seconds = Some(0.0);
    }
    manifest.write(&cli.out)?;
    Ok(manifest)
}

fn finish_manifest(
    cli: &Cli,
    mut manifest: RunManifest,
    started: Instant,
) -> Result<(), RunError> {
    if cli.timings {
        manifest.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
        manifest.write(&cli.out)?;
    }
    Ok(())
}

/// The slope fields every summary carries, named per the report schema.
#[derive(Debug, serde::Serialize)]
struct SlopeSummary {
    slope: f64,
    ci_lo: f64,
    ci_hi: f64,
    r2: f64,
    intercept: f64,
}

impl From<&SlopeFit> for SlopeSummary {
    fn from(fit: &SlopeFit) -> Self {
        Self {
            slope: fit.slope,
            ci_lo: fit.ci_lo,
            ci_hi: fit.ci_hi,
            r2: fit.r_squared,
            intercept: fit.intercept,
        }
    }
}

fn cmd_check_hyp(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let params = serde_json::to_value(&config.experiment.hypothesis).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "check-hyp",
        params,
        &["hypothesis.csv", "hypothesis_summary.json"],
        config.experiment.hypothesis.samples as u64,
    )?;
    let noise = config.build_noise()?;
    let flux = config.build_flux()?;
    let report = verify_hypothesis_bounds(
        &noise,
        &flux,
        config.experiment.hypothesis.samples,
        config.sample_box(),
        config.seed,
    );
    let mut table = Table::new(&[
        "d0_hat",
        "d0_declared",
        "d1_hat",
        "d1_declared",
        "gamma_hat",
        "gamma_declared",
        "samples",
        "pass",
    ]);
    table.push(vec![
        report.d0_hat,
        report.d0_declared,
        report.d1_hat,
        report.d1_declared,
        report.gamma_hat,
        report.gamma_declared,
        report.samples as f64,
        if report.pass { 1.0 } else { 0.0 },
    ]);
    emit_csv(&cli.out.join("hypothesis.csv"), &table)?;
    emit_summary_json(&cli.out.join("hypothesis_summary.json"), &report)?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "hypothesis bounds: D0 {:.4e} <= {:.4e}, D1 {:.4e} <= {:.4e}, Gamma {:.4e} <= {:.4e} -> {}",
        report.d0_hat,
        report.d0_declared,
        report.d1_hat,
        report.d1_declared,
        report.gamma_hat,
        report.gamma_declared,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        return Err(RunError::Experiment(
            "empirical hypothesis bounds exceeded the declared constants".into(),
        ));
    }
    Ok(())
}

fn experiment_env<'a>(
    config: &'a Config,
    grid: fluctlab_core::model::TorusGrid,
    flux: &'a fluctlab_core::model::FluxModel,
    noise: &'a fluctlab_core::model::NoiseModel,
    runner: &'a RayonRunner,
) -> ExperimentEnv<'a> {
    ExperimentEnv {
        grid,
        flux,
        noise,
        cfg: &config.solver,
        seed: config.seed,
        runner,
    }
}

fn cmd_scaling(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.scaling;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "scaling",
        params,
        &["scaling.csv", "scaling_summary.json", "scaling.svg"],
        section.replicates as u64,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let runner = RayonRunner;
    let env = experiment_env(config, grid, &flux, &noise, &runner);
    let report = run_scaling_experiment(
        &env,
        section.q,
        &section.eps_grid,
        section.eta,
        section.replicates,
    )?;

    let mut table = Table::new(&["eps", "estimate", "stderr"]);
    for p in &report.points {
        table.push(vec![p.eps, p.estimate, p.stderr]);
    }
    emit_csv(&cli.out.join("scaling.csv"), &table)?;

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        q: f64,
        eta: f64,
        replicates: u32,
        degenerate: bool,
        slope: Option<SlopeSummary>,
        points: &'a [fluctlab_core::analysis::SamplePoint],
    }
    emit_summary_json(
        &cli.out.join("scaling_summary.json"),
        &Summary {
            q: report.q,
            eta: report.eta,
            replicates: report.replicates,
            degenerate: report.degenerate,
            slope: report.fit.as_ref().map(SlopeSummary::from),
            points: &report.points,
        },
    )?;
    emit_svg_plot(
        &cli.out.join("scaling.svg"),
        &PlotSeries {
            x: report.points.iter().map(|p| p.eps).collect(),
            y: report.points.iter().map(|p| p.estimate).collect(),
            fit: report.fit.as_ref().map(|f| (f.slope, f.intercept)),
            x_label: "eps".into(),
            y_label: format!("E ||u-1||^{}", report.q),
            title: "moment scaling".into(),
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    match &report.fit {
        Some(fit) => println!(
            "scaling: q = {}, slope = {:.4} (ci [{:.4}, {:.4}], r2 = {:.4}, target {})",
            report.q,
            fit.slope,
            fit.ci_lo,
            fit.ci_hi,
            fit.r_squared,
            report.q / 2.0
        ),
        None => println!("scaling: degenerate (all estimates zero)"),
    }
    Ok(())
}

fn cmd_clt(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.clt;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "clt",
        params,
        &["clt.csv", "clt_summary.json", "clt.svg"],
        section.replicates as u64,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let runner = RayonRunner;
    let env = experiment_env(config, grid, &flux, &noise, &runner);
    let report = run_clt_experiment(&env, &section.eps_grid, section.replicates)?;

    let mut table = Table::new(&["eps", "estimate", "stderr"]);
    for p in &report.points {
        table.push(vec![p.eps, p.estimate, p.stderr]);
    }
    emit_csv(&cli.out.join("clt.csv"), &table)?;

    let decreasing = report
        .points
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate + 2.0 * (w[0].stderr + w[1].stderr));
    let ratio = match (report.points.first(), report.points.last()) {
        (Some(a), Some(b)) if a.estimate > 0.0 => b.estimate / a.estimate,
        _ => f64::NAN,
    };
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        replicates: u32,
        decreasing_within_2stderr: bool,
        smallest_over_largest: f64,
        limit_scale: fluctlab_core::analysis::SamplePoint,
        points: &'a [fluctlab_core::analysis::SamplePoint],
    }
    emit_summary_json(
        &cli.out.join("clt_summary.json"),
        &Summary {
            replicates: report.replicates,
            decreasing_within_2stderr: decreasing,
            smallest_over_largest: ratio,
            limit_scale: report.limit_scale,
            points: &report.points,
        },
    )?;
    emit_svg_plot(
        &cli.out.join("clt.svg"),
        &PlotSeries {
            x: report.points.iter().map(|p| p.eps).collect(),
            y: report.points.iter().map(|p| p.estimate).collect(),
            fit: None,
            x_label: "eps".into(),
            y_label: "E ||v - v_lim||_L1L1".into(),
            title: "central limit gap".into(),
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "clt: gap {:.4e} -> {:.4e} (ratio {:.3}), decreasing within 2 stderr: {}",
        report.points.first().map(|p| p.estimate).unwrap_or(f64::NAN),
        report.points.last().map(|p| p.estimate).unwrap_or(f64::NAN),
        ratio,
        decreasing
    );
    Ok(())
}

fn cmd_gaps(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.gaps;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "gaps",
        params,
        &[
            "viscous_gap.csv",
            "linear_gap.csv",
            "h_gap.csv",
            "gaps_summary.json",
            "h_gap.svg",
        ],
        (section.replicates + section.h_replicates) as u64,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let runner = RayonRunner;
    let env = experiment_env(config, grid, &flux, &noise, &runner);
    let viscous = run_viscous_gap(
        &env,
        &section.eps_grid,
        &section.eta_grid,
        section.replicates,
        section.refine,
    )?;
    let mut h_cfg = config.solver.clone();
    h_cfg.output_stride = section.h_stride;
    let h_env = ExperimentEnv {
        cfg: &h_cfg,
        ..experiment_env(config, grid, &flux, &noise, &runner)
    };
    let hgap = run_h_gap(&h_env, section.h_eta, &section.h_eps_grid, section.h_replicates)?;

    let mut table = Table::new(&["eps", "eta", "mean", "stderr"]);
    for c in &viscous.nonlinear {
        table.push(vec![c.eps, c.eta, c.mean, c.stderr]);
    }
    emit_csv(&cli.out.join("viscous_gap.csv"), &table)?;

    let mut table = Table::new(&["eta", "mean", "stderr"]);
    for c in &viscous.linear {
        table.push(vec![c.eta, c.mean, c.stderr]);
    }
    emit_csv(&cli.out.join("linear_gap.csv"), &table)?;

    let mut table = Table::new(&["eps", "sup_gap", "stderr", "argmax_t"]);
    for p in &hgap.points {
        table.push(vec![p.eps, p.sup_gap, p.stderr, p.argmax_t]);
    }
    emit_csv(&cli.out.join("h_gap.csv"), &table)?;

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        viscous: &'a fluctlab_core::analysis::ViscousGapReport,
        h_eta: f64,
        h_slope: Option<SlopeSummary>,
        h_points: &'a [fluctlab_core::analysis::HGapPoint],
    }
    emit_summary_json(
        &cli.out.join("gaps_summary.json"),
        &Summary {
            viscous: &viscous,
            h_eta: hgap.eta,
            h_slope: hgap.fit.as_ref().map(SlopeSummary::from),
            h_points: &hgap.points,
        },
    )?;
    emit_svg_plot(
        &cli.out.join("h_gap.svg"),
        &PlotSeries {
            x: hgap.points.iter().map(|p| p.eps).collect(),
            y: hgap.points.iter().map(|p| p.sup_gap).collect(),
            fit: hgap.fit.as_ref().map(|f| (f.slope, f.intercept)),
            x_label: "eps".into(),
            y_label: "sup_t E ||w(t)||^2".into(),
            title: format!("fixed-viscosity gap, eta = {}", hgap.eta),
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "gaps: linear gap {:?}; h-gap slope {:?}",
        viscous
            .linear
            .iter()
            .map(|c| (c.eta, c.mean))
            .collect::<Vec<_>>(),
        hgap.fit.as_ref().map(|f| f.slope)
    );
    Ok(())
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let n = traj.grid().n_cells();
    let mut headers = vec!["t".to_string()];
    headers.extend((0..n).map(|i| format!("x_{i}")));
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    for (j, &t) in traj.times().iter().enumerate() {
        let mut row = Vec::with_capacity(n + 1);
        row.push(t);
        row.extend_from_slice(traj.field(j).values());
        table.rows.push(row);
    }
    table
}

fn cmd_skeleton(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.skeleton;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "skeleton",
        params,
        &["skeleton_trajectory.csv", "skeleton_summary.json"],
        1,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let t_end = config.solver.t_end;
    let control = build_control(
        &section.control,
        t_end,
        section.steps,
        noise.n_modes(),
        "experiment.skeleton.control",
    )?;
    let time = TimeGrid {
        n_steps: section.steps,
        dt: t_end / section.steps as f64,
    };
    let prop = SpectralPropagator::new(flux.derivative(1.0), section.eta)?;
    let traj = solve_skeleton(&noise, &prop, grid, &control, time, section.stride)?;
    emit_csv(&cli.out.join("skeleton_trajectory.csv"), &trajectory_table(&traj))?;

    #[derive(serde::Serialize)]
    struct Summary {
        energy: f64,
        cm_norm_sq: f64,
        l1l1_norm: f64,
        terminal_l1: f64,
        eta: f64,
    }
    emit_summary_json(
        &cli.out.join("skeleton_summary.json"),
        &Summary {
            energy: control.energy(),
            cm_norm_sq: control.cm_norm_sq(),
            l1l1_norm: traj.l1_l1_norm().map_err(RunError::from)?,
            terminal_l1: lp_norm(traj.last_field(), 1.0).map_err(RunError::from)?,
            eta: section.eta,
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "skeleton: energy {:.6}, ||X_h||_L1L1 {:.6}",
        control.energy(),
        traj.l1_l1_norm().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_rate(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.rate;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "rate",
        params,
        &["rate_control.csv", "rate_summary.json"],
        1,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let t_end = config.solver.t_end;
    let time = TimeGrid {
        n_steps: section.control_steps,
        dt: t_end / section.control_steps as f64,
    };
    let problem = RateProblem::new(&noise, flux.derivative(1.0), grid, time)?;
    let generator = build_control(
        &section.generator,
        t_end,
        section.control_steps,
        noise.n_modes(),
        "experiment.rate.generator",
    )?;
    let target_traj = problem.skeleton_of(&generator)?;
    let target = RateTarget::from_trajectory(&target_traj, &problem)?;
    let recovery = problem.rate_function(&target, section.tol, section.max_iter)?;
    let event = problem.rate_of_event(&config.rate_event(), section.tol, section.max_iter)?;

    let mut headers = vec!["t_mid".to_string()];
    headers.extend((1..=noise.n_modes()).map(|k| format!("hdot_{k}")));
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    for j in 0..recovery.control.n_steps() {
        let mut row = Vec::with_capacity(noise.n_modes() + 1);
        row.push((j as f64 + 0.5) * recovery.control.dt());
        for k in 0..noise.n_modes() {
            row.push(recovery.control.coeff(j, k));
        }
        table.rows.push(row);
    }
    emit_csv(&cli.out.join("rate_control.csv"), &table)?;

    #[derive(serde::Serialize)]
    struct RecoverySummary {
        value: f64,
        infinite: bool,
        residual: f64,
        relative_residual: f64,
        target_norm: f64,
        iterations: usize,
        converged: bool,
        generator_energy: f64,
    }
    #[derive(serde::Serialize)]
    struct EventSummary {
        threshold: f64,
        value: f64,
        infinite: bool,
        control_energy: f64,
    }
    #[derive(serde::Serialize)]
    struct Summary {
        recovery: RecoverySummary,
        event: EventSummary,
    }
    emit_summary_json(
        &cli.out.join("rate_summary.json"),
        &Summary {
            recovery: RecoverySummary {
                value: recovery.value,
                infinite: recovery.infinite,
                residual: recovery.residual,
                relative_residual: recovery.relative_residual,
                target_norm: recovery.target_norm,
                iterations: recovery.iterations,
                converged: recovery.converged,
                generator_energy: generator.energy(),
            },
            event: EventSummary {
                threshold: config.rate_event().threshold,
                value: event.value,
                infinite: event.infinite,
                control_energy: event.control.energy(),
            },
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "rate: recovery I = {:.6} (generator energy {:.6}, residual {:.3e}, {} iterations); event I_F = {:.6}",
        recovery.value,
        generator.energy(),
        recovery.residual,
        recovery.iterations,
        event.value
    );
    if !recovery.converged {
        return Err(RunError::Experiment(
            "rate-function recovery did not converge".into(),
        ));
    }
    Ok(())
}

fn cmd_mdp(cli: &Cli, config: &Config) -> Result<(), RunError> {
    let started = Instant::now();
    let section = &config.experiment.mdp;
    let params = serde_json::to_value(section).expect("serializable");
    let manifest = write_manifest(
        cli,
        config,
        "mdp",
        params,
        &[
            "condition_a.csv",
            "condition_b.csv",
            "mdp_probability.csv",
            "mdp_summary.json",
        ],
        section.replicates as u64,
    )?;
    let grid = config.build_grid()?;
    let flux = config.build_flux()?;
    let noise = config.build_noise()?;
    let scale = config.build_scale()?;
    let runner = RayonRunner;
    let t_end = config.solver.t_end;
    let speed = flux.derivative(1.0);

    // Condition (b): skeleton continuity along weakly-null perturbations.
    let cb = &section.condition_b;
    let h_b = build_control(
        &section.control,
        t_end,
        cb.steps,
        noise.n_modes(),
        "experiment.mdp.control",
    )?;
    let cb_time = TimeGrid {
        n_steps: cb.steps,
        dt: t_end / cb.steps as f64,
    };
    let condition_b = run_condition_b(
        &noise, speed, grid, &h_b, cb.ball, cb.mode, cb.amplitude, &cb.m_list, cb_time, 4,
    )?;

    // Condition (a): controlled equation vs skeleton.
    let h_a = build_control(
        &section.control,
        t_end,
        section.control_steps,
        noise.n_modes(),
        "experiment.mdp.control",
    )?;
    let condition_a = run_condition_a(
        grid,
        &flux,
        &noise,
        &scale,
        &config.solver,
        &h_a,
        &section.eps_grid,
        section.delta,
        section.replicates,
        config.seed,
        &runner,
    )?;

    // Event rate and (optionally) the importance-sampling shift.
    let rate_time = TimeGrid {
        n_steps: section.control_steps,
        dt: t_end / section.control_steps as f64,
    };
    let problem = RateProblem::new(&noise, speed, grid, rate_time)?;
    let event = config.mdp_event();
    let event_rate = problem.rate_of_event(&event, 1e-8, 4000)?;
    let shift = (section.importance_sampling && !event_rate.infinite)
        .then_some(&event_rate.control);
    let probability = estimate_mdp_probability(
        grid,
        &flux,
        &noise,
        &scale,
        &config.solver,
        &event,
        &section.eps_grid,
        section.replicates,
        shift,
        (!event_rate.infinite).then_some(event_rate.value),
        config.seed,
        &runner,
    )?;

    let mut table = Table::new(&["eps", "probability", "prob_stderr", "mean_gap", "gap_stderr"]);
    for r in &condition_a.rows {
        table.push(vec![r.eps, r.probability, r.prob_stderr, r.mean_gap, r.gap_stderr]);
    }
    emit_csv(&cli.out.join("condition_a.csv"), &table)?;

    let mut table = Table::new(&["m", "gap"]);
    for &(m, gap) in &condition_b.rows {
        table.push(vec![m as f64, gap]);
    }
    emit_csv(&cli.out.join("condition_b.csv"), &table)?;

    let mut table = Table::new(&[
        "eps",
        "lambda_sq",
        "p_plain",
        "p_plain_stderr",
        "norm_plain",
        "plain_is_bound",
        "p_shifted",
        "p_shifted_stderr",
        "norm_shifted",
    ]);
    for r in &probability.rows {
        table.push(vec![
            r.eps,
            r.lambda_sq,
            r.p_plain,
            r.p_plain_stderr,
            r.norm_plain,
            if r.plain_is_bound { 1.0 } else { 0.0 },
            r.p_shifted.unwrap_or(f64::NAN),
            r.p_shifted_stderr.unwrap_or(f64::NAN),
            r.norm_shifted.unwrap_or(f64::NAN),
        ]);
    }
    emit_csv(&cli.out.join("mdp_probability.csv"), &table)?;

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        condition_a: &'a fluctlab_core::mdp::ConditionAReport,
        condition_b: &'a fluctlab_core::mdp::ConditionBReport,
        event_rate: f64,
        event_rate_infinite: bool,
        probability: &'a fluctlab_core::mdp::MdpProbReport,
    }
    emit_summary_json(
        &cli.out.join("mdp_summary.json"),
        &Summary {
            condition_a: &condition_a,
            condition_b: &condition_b,
            event_rate: event_rate.value,
            event_rate_infinite: event_rate.infinite,
            probability: &probability,
        },
    )?;
    finish_manifest(cli, manifest, started)?;
    println!(
        "mdp: P(gap > {}) {:?}; condition-b gap {:.4e} -> {:.4e}; I_F = {:.4}",
        condition_a.delta,
        condition_a
            .rows
            .iter()
            .map(|r| (r.eps, r.probability))
            .collect::<Vec<_>>(),
        condition_b.rows.first().map(|r| r.1).unwrap_or(f64::NAN),
        condition_b.rows.last().map(|r| r.1).unwrap_or(f64::NAN),
        event_rate.value
    );
    Ok(())
}

fn cmd_selftest() -> Result<(), RunError> {
    let checks: Vec<(&str, Box<dyn Fn() -> Result<(), String>>)> = vec![
        ("hypothesis bounds", Box::new(selftest_hypothesis)),
        ("kinetic bracket identity", Box::new(selftest_kinetic)),
        ("constant preservation", Box::new(selftest_constant)),
        ("eps = 0 reduction", Box::new(selftest_eps_zero)),
        ("keyed increments replay", Box::new(selftest_wiener)),
        ("spectral transport", Box::new(selftest_spectral)),
        ("skeleton linearity", Box::new(selftest_skeleton_linearity)),
        ("rate adjoint identity", Box::new(selftest_adjoint)),
        ("parallel determinism", Box::new(selftest_parallel)),
        ("csv round trip", Box::new(selftest_csv)),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok      {name}"),
            Err(e) => {
                failures += 1;
                println!("FAIL    {name}: {e}");
            }
        }
    }
    if failures > 0 {
        return Err(RunError::Experiment(format!("{failures} selftest failures")));
    }
    Ok(())
}

fn selftest_config() -> Config {
    Config::default()
}

fn selftest_hypothesis() -> Result<(), String> {
    let config = selftest_config();
    let report = verify_hypothesis_bounds(
        &config.build_noise().map_err(|e| e.to_string())?,
        &config.build_flux().map_err(|e| e.to_string())?,
        2000,
        config.sample_box(),
        7,
    );
    if report.pass {
        Ok(())
    } else {
        Err(format!("{report:?}"))
    }
}

fn selftest_kinetic() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let key = StreamKey::new(11, 90, 0);
    for pair in 0..200u32 {
        let u = Field::from_fn(grid, |x| 3.0 * key.standard_normal(pair, (x * 1e4) as u32));
        let v = Field::from_fn(grid, |x| 3.0 * key.standard_normal(pair + 1000, (x * 1e4) as u32));
        let bracket = kinetic_distance(&u, &v).map_err(|e| e.to_string())?;
        let direct = lp_norm(&u.sub(&v).map_err(|e| e.to_string())?, 1.0).map_err(|e| e.to_string())?;
        if (bracket - direct).abs() > 1e-12 {
            return Err(format!("pair {pair}: {bracket} vs {direct}"));
        }
    }
    Ok(())
}

fn selftest_constant() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let flux = config.build_flux().map_err(|e| e.to_string())?;
    let mut cfg = config.solver.clone();
    cfg.t_end = 0.2;
    let traj = solve_deterministic(&Field::constant(grid, 1.0), &flux, &cfg)
        .map_err(|e| e.to_string())?;
    for f in traj.fields() {
        if f.values().iter().any(|&v| v != 1.0) {
            return Err("constant state drifted".into());
        }
    }
    Ok(())
}

fn selftest_eps_zero() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let flux = config.build_flux().map_err(|e| e.to_string())?;
    let noise = config.build_noise().map_err(|e| e.to_string())?;
    let mut cfg = config.solver.clone();
    cfg.t_end = 0.1;
    let u0 = Field::from_fn(grid, |x| 1.0 + 0.2 * (core::f64::consts::TAU * x).sin());
    let det = solve_deterministic(&u0, &flux, &cfg).map_err(|e| e.to_string())?;
    let time = plan_time_grid(&u0, &flux, &cfg).map_err(|e| e.to_string())?;
    let path = WienerPath::generate(StreamKey::new(5, 91, 0), noise.n_modes(), time.n_steps, time.dt)
        .map_err(|e| e.to_string())?;
    let spde = solve_spde(&u0, &flux, &noise, &path, 0.0, &cfg).map_err(|e| e.to_string())?;
    if det.fields() != spde.fields() {
        return Err("eps = 0 run differs from the deterministic stepper".into());
    }
    Ok(())
}

fn selftest_wiener() -> Result<(), String> {
    let key = StreamKey::new(123, 92, 7);
    let a = WienerPath::generate(key, 8, 128, 1.0 / 128.0).map_err(|e| e.to_string())?;
    let b = WienerPath::generate(key, 8, 128, 1.0 / 128.0).map_err(|e| e.to_string())?;
    if a != b {
        return Err("identical keys produced different increments".into());
    }
    Ok(())
}

fn selftest_spectral() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let prop = SpectralPropagator::new(1.0, 0.0).map_err(|e| e.to_string())?;
    let f = Field::from_fn(grid, |x| {
        1.0 + (core::f64::consts::TAU * x).cos() - 0.3 * (core::f64::consts::TAU * 3.0 * x).sin()
    });
    let shifted = prop.propagate(&f, 5.0 * grid.dx()).map_err(|e| e.to_string())?;
    for i in 0..grid.n_cells() {
        if shifted.values()[i] != f.values()[grid.wrap(i as isize - 5)] {
            return Err("grid-aligned shift is not an exact rotation".into());
        }
    }
    let norm0 = lp_norm(&f, 2.0).map_err(|e| e.to_string())?;
    let moved = prop.propagate(&f, 0.1234).map_err(|e| e.to_string())?;
    let norm1 = lp_norm(&moved, 2.0).map_err(|e| e.to_string())?;
    if (norm0 - norm1).abs() > 1e-12 {
        return Err(format!("transport not unitary: {norm0} vs {norm1}"));
    }
    Ok(())
}

fn selftest_skeleton_linearity() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let noise = config.build_noise().map_err(|e| e.to_string())?;
    let prop = SpectralPropagator::new(1.0, 0.0).map_err(|e| e.to_string())?;
    let time = TimeGrid {
        n_steps: 64,
        dt: 1.0 / 64.0,
    };
    let h1 = Control::constant_mode(1.0, 16, noise.n_modes(), 1, 0.7).map_err(|e| e.to_string())?;
    let h2 = Control::constant_mode(1.0, 16, noise.n_modes(), 4, -0.4).map_err(|e| e.to_string())?;
    let sum = h1.add(&h2).map_err(|e| e.to_string())?;
    let a = solve_skeleton(&noise, &prop, grid, &h1, time, 1).map_err(|e| e.to_string())?;
    let b = solve_skeleton(&noise, &prop, grid, &h2, time, 1).map_err(|e| e.to_string())?;
    let s = solve_skeleton(&noise, &prop, grid, &sum, time, 1).map_err(|e| e.to_string())?;
    for j in 0..s.len() {
        for i in 0..grid.n_cells() {
            let lhs = s.field(j).values()[i];
            let rhs = a.field(j).values()[i] + b.field(j).values()[i];
            if (lhs - rhs).abs() > 1e-10 {
                return Err(format!("linearity violated at t index {j}: {lhs} vs {rhs}"));
            }
        }
    }
    Ok(())
}

fn selftest_adjoint() -> Result<(), String> {
    let config = selftest_config();
    let grid = config.build_grid().map_err(|e| e.to_string())?;
    let noise = config.build_noise().map_err(|e| e.to_string())?;
    let time = TimeGrid {
        n_steps: 12,
        dt: 1.0 / 12.0,
    };
    let problem = RateProblem::new(&noise, 1.0, grid, time).map_err(|e| e.to_string())?;
    let key = StreamKey::new(19, 93, 0);
    let h = Control::from_coeffs(
        1.0,
        12,
        noise.n_modes(),
        (0..12 * noise.n_modes())
            .map(|i| key.standard_normal(0, i as u32))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let g: Vec<Field> = (0..12)
        .map(|j| Field::from_fn(grid, |x| key.standard_normal(1 + j as u32, (x * 1e4) as u32)))
        .collect();
    let kh = problem.skeleton_of(&h).map_err(|e| e.to_string())?;
    let lhs: f64 = (0..12)
        .map(|j| {
            time.dt
                * grid.dx()
                * kh.field(j + 1)
                    .values()
                    .iter()
                    .zip(g[j].values())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .sum();
    let kg = problem.adjoint_of(&g).map_err(|e| e.to_string())?;
    let rhs: f64 = time.dt
        * h.coeffs()
            .iter()
            .zip(kg.coeffs())
            .map(|(a, b)| a * b)
            .sum::<f64>();
    if (lhs - rhs).abs() > 1e-10 * (1.0 + lhs.abs()) {
        return Err(format!("<Kh,g> = {lhs} but <h,K*g> = {rhs}"));
    }
    Ok(())
}

fn selftest_parallel() -> Result<(), String> {
    let task = |rep: u32| -> Result<Vec<f64>, String> {
        let key = StreamKey::new(3, 94, rep);
        Ok(vec![key.standard_normal(0, 0)])
    };
    let serial = SerialRunner
        .run(32, &task)
        .map_err(|e| e.to_string())?;
    let parallel = {
        use fluctlab_core::runner::ReplicateRunner as _;
        RayonRunner.run(32, &task).map_err(|e| e.to_string())?
    };
    if serial != parallel {
        return Err("parallel reduction differs from serial".into());
    }
    Ok(())
}

fn selftest_csv() -> Result<(), String> {
    let mut table = Table::new(&["v"]);
    for i in 0..50 {
        let key = StreamKey::new(1, 95, i);
        table.push(vec![key.standard_normal(0, 0) * 1e-7]);
    }
    let text = table.to_csv();
    for (line, row) in text.lines().skip(1).zip(&table.rows) {
        let parsed: f64 = line.parse().map_err(|e| format!("{e}"))?;
        if parsed.to_bits() != row[0].to_bits() {
            return Err("csv did not round-trip".into());
        }
    }
    Ok(())
}
