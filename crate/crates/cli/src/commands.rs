use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::json;

use netsample::dynamics::{
    integrate_with_substeps, substeps_for, ModelKind, ParameterRanges, StableInstance, Trajectory,
    TrajectoryMeta,
};
use netsample::experiments::{
    make_init, stable_model, stream, write_plot_data, write_sweep_csv, Experiment, InitConfig,
    InitKind, ModelConfig, SweepConfig,
};
use netsample::graph::{generate_network, load_network, save_network, Network};
use netsample::io;
use netsample::linalg;
use netsample::sampling::{joint_recover_state, plan_arbitrary, plan_bandlimited, sample_nodes};
use netsample::spectral::{
    band_frequency_set, bandwidth_for_modes, decompose, jacobian, support_bandwidth, SpectralBasis,
    DEFAULT_SUPPORT_TOLERANCE,
};

use crate::manifest::Recorder;
use crate::presets::{self, Scale};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn data(message: impl Into<String>) -> Failure {
    Failure {
        code: Failure::DATA,
        message: message.into(),
    }
}

fn check_nodes(expected: usize, got: usize, what: &str) -> Outcome {
    if expected == got {
        Ok(())
    } else {
        Err(data(format!(
            "{what} has {got} nodes, the network has {expected}"
        )))
    }
}

/// Evaluation times `k * step` for `k = 0..=floor(horizon / step)`.
fn grid(step: f64, horizon: f64) -> Result<Vec<f64>, Failure> {
    if !(step > 0.0 && step.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Failure::usage(format!(
            "need step > 0 and horizon >= 0 (step = {step}, horizon = {horizon})"
        )));
    }
    let count = (horizon / step * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count).map(|k| k as f64 * step).collect())
}

#[derive(Args)]
pub struct GenArgs {
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Probability of each directed edge.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Network JSON to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn gen(args: GenArgs) -> Outcome {
    let mut rec = Recorder::start("gen", args.seed);
    let net = generate_network(args.n, args.p, args.seed)?;
    save_network(&net, &args.out)?;
    rec.config(json!({ "n": args.n, "p": args.p, "edges": net.edge_count() }));
    rec.output("network", &args.out);
    rec.finish(&args.out)?;
    println!(
        "{}: {} nodes, {} edges",
        args.out.display(),
        net.n(),
        net.edge_count()
    );
    Ok(())
}

#[derive(Args)]
pub struct ModelArgs {
    /// Dynamics: pd (population) or mak (mass-action kinetics).
    #[arg(long, default_value = "pd")]
    model: ModelKind,
    /// Influx F (mak only). Omit all parameters to draw a stable set from --seed.
    #[arg(long)]
    influx: Option<f64>,
    /// Decay rate B.
    #[arg(long)]
    decay: Option<f64>,
    /// Coupling strength R.
    #[arg(long)]
    coupling: Option<f64>,
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.model,
            influx: self.influx,
            decay: self.decay,
            coupling: self.coupling,
            ranges: ParameterRanges::default(),
        }
    }
}

/// A network with a stable model and the eigenbasis of its linearization.
struct Instance {
    net: Network,
    stable: StableInstance,
    basis: SpectralBasis,
}

fn instance(network: &Path, model: &ModelArgs, seed: u64) -> Result<Instance, Failure> {
    let net = load_network(network)?;
    let stable = stable_model(&model.config(), &net, stream(seed, 1))?;
    let basis = decompose(&jacobian(&stable.model, &net, &stable.equilibrium)?)?;
    log::info!(
        "model {:?}, |lambda|_max = {:.6}, basis condition {:.3e}",
        stable.model,
        basis.lambda_max(),
        basis.condition()
    );
    Ok(Instance { net, stable, basis })
}

#[derive(Clone, Copy, ValueEnum)]
enum InitChoice {
    Bandlimited,
    Arbitrary,
}

#[derive(Args)]
pub struct InitArgs {
    /// Initial deviation from the equilibrium.
    #[arg(long, value_enum, default_value_t = InitChoice::Bandlimited)]
    init: InitChoice,
    /// Bandwidth of a bandlimited deviation.
    #[arg(long, conflicts_with = "modes")]
    omega: Option<f64>,
    /// Number of smoothest modes in a bandlimited deviation.
    #[arg(long)]
    modes: Option<usize>,
    /// ||y(0)||, or ||y(0)|| / ||x_inf|| with --relative.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long)]
    relative: bool,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Network JSON.
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    init: InitArgs,
    /// Output spacing.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Outcome {
    let mut rec = Recorder::start("simulate", args.seed);
    let inst = instance(&args.network, &args.model, args.seed)?;
    let init = InitConfig {
        kind: match args.init.init {
            InitChoice::Bandlimited => InitKind::Bandlimited,
            InitChoice::Arbitrary => InitKind::Arbitrary,
        },
        omega: args.init.omega,
        modes: args.init.modes,
        amplitude: args.init.amplitude,
        relative_amplitude: args.init.relative,
    };
    let eq = &inst.stable.equilibrium;
    let y0 = make_init(&init, &inst.basis, eq, stream(args.seed, 2))?;
    let substeps = substeps_for(args.step, inst.basis.lambda_max());
    let mut traj = integrate_with_substeps(
        &inst.stable.model,
        &inst.net,
        &(eq + &y0),
        args.step,
        args.horizon,
        substeps,
    )?;
    traj.meta.seed = Some(args.seed);
    io::save_trajectory(&traj, &args.out)?;

    rec.config(json!({
        "model": inst.stable.model,
        "init": init,
        "step": args.step,
        "horizon": args.horizon,
        "substeps": substeps,
        "y0_norm": y0.norm(),
        "equilibrium": eq.as_slice(),
    }));
    rec.input("network", &args.network);
    rec.output("trajectory", &args.out);
    rec.finish(&args.out)?;
    println!(
        "{}: {} steps, ||y(0)|| = {:.6e}",
        args.out.display(),
        traj.len(),
        y0.norm()
    );
    Ok(())
}

#[derive(Args)]
pub struct PlanArgs {
    /// Network JSON.
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Band: graph frequencies strictly within this distance of |lambda|_max.
    #[arg(long, conflicts_with_all = ["modes", "arbitrary"], required_unless_present_any = ["modes", "arbitrary"])]
    omega: Option<f64>,
    /// Band: the given number of smoothest modes.
    #[arg(long, conflicts_with = "arbitrary")]
    modes: Option<usize>,
    /// Plan for an arbitrary deviation, read from --trajectory.
    #[arg(long, requires_all = ["budget", "trajectory"])]
    arbitrary: bool,
    /// Modes kept, and nodes sampled, with --arbitrary.
    #[arg(long, requires = "arbitrary")]
    budget: Option<usize>,
    /// Sample-set size (default: the band size).
    #[arg(long, conflicts_with = "arbitrary")]
    size: Option<usize>,
    /// Trajectory whose first row is x(0); fixes ||y(0)||.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// ||y(0)|| when no trajectory is given.
    #[arg(long, conflicts_with = "trajectory")]
    y0_norm: Option<f64>,
    /// Spectral threshold (default: epsilon-relative * ||y(0)||).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon_relative: f64,
    /// Also write the Jacobian spectrum as JSON.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plan JSON to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn plan(args: PlanArgs) -> Outcome {
    let mut rec = Recorder::start("plan", args.seed);
    let inst = instance(&args.network, &args.model, args.seed)?;
    let eq = inst.stable.equilibrium.clone();
    let y0 = match &args.trajectory {
        Some(path) => {
            let traj = io::load_trajectory(path)?;
            check_nodes(inst.net.n(), traj.n(), "trajectory")?;
            rec.input("trajectory", path);
            Some(traj.state(0) - &eq)
        }
        None => None,
    };
    let y0_norm = match (&y0, args.y0_norm) {
        (Some(y), _) => y.norm(),
        (None, Some(v)) => v,
        (None, None) => return Err(Failure::usage("give --trajectory or --y0-norm")),
    };
    let epsilon = args.epsilon.unwrap_or(args.epsilon_relative * y0_norm);

    let mut plan = if args.arbitrary {
        let y0 = y0.as_ref().expect("clap requires --trajectory");
        let budget = args.budget.expect("clap requires --budget");
        let (plan, projection) = plan_arbitrary(&inst.basis, y0, budget, epsilon, eq)?;
        log::info!(
            "projection keeps {} modes, drops ||y|| = {:.3e}",
            projection.band.len(),
            projection.dropped_norm
        );
        plan
    } else {
        let omega = match (args.omega, args.modes) {
            (Some(w), _) => w,
            (None, Some(m)) => bandwidth_for_modes(&inst.basis, m)?,
            (None, None) => unreachable!("clap requires --omega or --modes"),
        };
        let band = band_frequency_set(&inst.basis, omega)?;
        if let Some(y) = &y0 {
            let (edge, _) = support_bandwidth(&inst.basis, y, DEFAULT_SUPPORT_TOLERANCE)?;
            if edge > omega {
                log::warn!("y(0) reaches bandwidth {edge:.6}, beyond omega = {omega}; recovery will not be exact");
            }
        }
        plan_bandlimited(&inst.basis, band, args.size, y0_norm, epsilon, eq)?
    };
    plan.model = Some(inst.stable.model);
    io::save_plan(&plan, &args.out)?;
    if let Some(path) = &args.spectrum {
        fs::write(path, io::spectrum_to_json(&inst.basis.summary()) + "\n")
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        rec.output("spectrum", path);
    }

    rec.config(json!({
        "model": inst.stable.model,
        "omega": args.omega,
        "modes": args.modes,
        "arbitrary": args.arbitrary,
        "budget": args.budget,
        "size": args.size,
        "y0_norm": y0_norm,
        "epsilon": epsilon,
    }));
    rec.input("network", &args.network);
    rec.output("plan", &args.out);
    rec.finish(&args.out)?;
    println!("nodes {:?}", plan.nodes);
    println!("band {:?}", plan.band.indices);
    println!(
        "Omega_c {:.6e}, F_s {:.6e}, rank certificate {:.3e}{}{}",
        plan.cutoff.value,
        plan.fs,
        plan.rank_certificate,
        if plan.cutoff.clamped { ", clamped" } else { "" },
        if plan.undersampled {
            ", undersampled"
        } else {
            ""
        },
    );
    Ok(())
}

#[derive(Args)]
pub struct SampleArgs {
    /// Network JSON.
    #[arg(long)]
    network: PathBuf,
    /// Plan JSON; supplies the nodes, model and equilibrium.
    #[arg(long)]
    plan: PathBuf,
    /// Trajectory whose first row is x(0).
    #[arg(long)]
    trajectory: PathBuf,
    /// Sampling frequency (default: the plan's F_s).
    #[arg(long, conflicts_with = "fs_multiple")]
    fs: Option<f64>,
    /// Sampling frequency as a multiple of the plan's F_s.
    #[arg(long)]
    fs_multiple: Option<f64>,
    /// Sampled span (default: the trajectory's).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn sample(args: SampleArgs) -> Outcome {
    let mut rec = Recorder::start("sample", args.seed);
    let plan = io::load_plan(&args.plan)?;
    let model = plan
        .model
        .ok_or_else(|| data("plan does not record its model"))?;
    let net = load_network(&args.network)?;
    check_nodes(net.n(), plan.n(), "plan")?;
    let traj = io::load_trajectory(&args.trajectory)?;
    check_nodes(net.n(), traj.n(), "trajectory")?;
    let fs = match (args.fs, args.fs_multiple) {
        (Some(f), _) => f,
        (None, Some(m)) => m * plan.fs,
        (None, None) => plan.fs,
    };
    let horizon = args
        .horizon
        .unwrap_or(*traj.times.last().expect("trajectories are nonempty"));
    let op = jacobian(&model, &net, &plan.equilibrium)?;
    let lambda_max = linalg::eigenvalues(&op.matrix)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    let record = sample_nodes(
        &model,
        &net,
        &traj.state(0),
        &plan.equilibrium,
        &plan.nodes,
        fs,
        horizon.max(1.0 / fs),
        lambda_max,
    )?;
    io::save_samples(&record, &plan.equilibrium, &args.out)?;

    rec.config(json!({ "fs": fs, "horizon": horizon, "nodes": plan.nodes }));
    rec.input("network", &args.network);
    rec.input("plan", &args.plan);
    rec.input("trajectory", &args.trajectory);
    rec.output("samples", &args.out);
    rec.finish(&args.out)?;
    println!(
        "{}: {} samples of {} nodes at F_s = {fs:.6e}",
        args.out.display(),
        record.len(),
        record.nodes.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct RecoverArgs {
    /// Plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Sample CSV (state values, header t,node_<i>,...).
    #[arg(long)]
    samples: PathBuf,
    /// Evaluation spacing (default: pi / (4 Omega_c)).
    #[arg(long)]
    step: Option<f64>,
    /// Evaluation span (default: the last sample time).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recovered trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn recover(args: RecoverArgs) -> Outcome {
    let mut rec = Recorder::start("recover", args.seed);
    let plan = io::load_plan(&args.plan)?;
    let record = io::load_samples(&args.samples, &plan.equilibrium)?;
    let step = args.step.unwrap_or(0.25 / plan.fs);
    let horizon = args
        .horizon
        .unwrap_or((record.len() - 1) as f64 / record.fs);
    let times = grid(step, horizon)?;
    let states = joint_recover_state(&plan, &record, &times)?;
    let traj = Trajectory::new(
        times,
        states,
        TrajectoryMeta {
            model: plan.model,
            seed: None,
            step,
        },
    )?;
    io::save_trajectory(&traj, &args.out)?;

    rec.config(json!({ "step": step, "horizon": horizon, "fs": record.fs }));
    rec.input("plan", &args.plan);
    rec.input("samples", &args.samples);
    rec.output("trajectory", &args.out);
    rec.finish(&args.out)?;
    println!("{}: {} rows", args.out.display(), traj.len());
    Ok(())
}

#[derive(Args)]
pub struct SweepArgs {
    /// Sweep configuration (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// Preset size.
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    /// Override the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for the CSV, plot data and manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output file stem (default: the preset or config file name).
    #[arg(long)]
    name: Option<String>,
    /// Print the configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

pub fn sweep(args: SweepArgs) -> Outcome {
    let (mut config, stem) = match (&args.config, &args.preset) {
        (Some(path), _) => (
            SweepConfig::load(path)?,
            path.file_stem()
                .map_or("sweep".into(), |s| s.to_string_lossy().into_owned()),
        ),
        (None, Some(name)) => {
            let text = presets::preset(name, args.scale).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown preset '{name}' (choose from {})",
                    presets::NAMES.join(", ")
                ))
            })?;
            (SweepConfig::from_toml(text)?, name.clone())
        }
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let stem = args.name.clone().unwrap_or(stem);
    let mut rec = Recorder::start("sweep", config.seed);
    if let Some(path) = &args.config {
        rec.input("config", path);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {:?} workers: {e}", args.jobs)))?;
    let (experiment, result) = pool.install(|| -> Result<_, Failure> {
        let experiment = Experiment::prepare(&config)?;
        let result = experiment.run_sweep();
        Ok((experiment, result))
    })?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let csv_path = args.out_dir.join(format!("{stem}.csv"));
    let file = File::create(&csv_path)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", csv_path.display())))?;
    write_sweep_csv(&result, BufWriter::new(file))
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", csv_path.display())))?;
    let plots = write_plot_data(&result, &args.out_dir, &stem)?;

    rec.config(json!({
        "sweep": experiment.resolved_config(),
        "instance": result.meta,
        "cells": result.cells.len(),
        "failures": result.failures(),
    }));
    rec.output("csv", &csv_path);
    for (key, path) in ["surface", "vs_fs", "vs_size"].into_iter().zip(&plots) {
        rec.output(key, path);
    }
    rec.finish(&csv_path)?;

    let meta = &result.meta;
    println!(
        "{}: {} cells, n = {}, |band| = {}, Omega_c = {:.6e}, horizon {:.3}",
        csv_path.display(),
        result.cells.len(),
        meta.n,
        meta.band_size,
        meta.time_cutoff,
        meta.horizon
    );
    match result.failures() {
        0 => Ok(()),
        k => Err(Failure {
            code: Failure::NUMERIC,
            message: format!("{k} of {} cells failed", result.cells.len()),
        }),
    }
}
