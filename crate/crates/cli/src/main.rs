//! `pose-ik`: command-line harness for the pose-imitation IK toolkit.
//!
//! Subcommands: `run` (full experiment pipeline), `synth` (generate seeded
//! demonstrations), `solve` (single trajectory, prints a JSON solution
//! stream), `metrics` (re-score a solve stream against the human
//! demonstration). Exit codes: 0 success, 1 config error, 2 runtime failure.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pose_ik_core::chain::RobotDefinition;
use pose_ik_core::constraints::{extract_human_pose, map_to_robot, SofteningFactor};
use pose_ik_core::experiment::{
    default_roi, emit_plot_data, emit_report, emit_timing, parse_solve_stream, run_experiment,
    solve_stream_to_jsonl, ExperimentConfig, ExperimentError, MarkedRef, RoiSpec,
    SolveStreamFrame, SolveStreamHeader,
};
use pose_ik_core::ingest::{
    exponential_smooth, load_trajectory, save_trajectory, synth_demo, to_robot_frame, TaskLabel,
    WorkspaceTransform, DEFAULT_ALPHA,
};
use pose_ik_core::metrics::{
    chain_pose_angle, pose_angle, AngleSource, MetricsReport, PoseAngleSeries, Roi, DEFAULT_DELTA,
};
use pose_ik_core::solver::{solve_trajectory, SolverConfig, SolverMode};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "pose-ik", version, about = "Octant-constrained pose-imitation IK")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a config file and emit reports.
    Run(RunArgs),
    /// Generate seeded synthetic demonstrations.
    Synth(SynthArgs),
    /// Solve one trajectory and print a JSON solution stream.
    Solve(SolveArgs),
    /// Score a solve stream against the human demonstration.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Task label (incision-straight, incision-curve, assembly-1/2/3).
    #[arg(long)]
    task: String,
    /// Number of demonstrations to generate.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Frames per demonstration.
    #[arg(long, default_value_t = 120)]
    frames: usize,
    /// Base seed; demonstration i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    /// Robot definition file (JSON).
    #[arg(long)]
    robot: PathBuf,
    /// Trajectory file (JSON Lines).
    #[arg(long)]
    traj: PathBuf,
    /// Solver: fabrik, pic, or pics.
    #[arg(long)]
    method: String,
    /// Softening factor for pics.
    #[arg(long, default_value_t = 1)]
    eta: u8,
    /// Exponential smoothing constant.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

#[derive(Args)]
struct MetricsArgs {
    /// Human trajectory file the stream was solved from.
    #[arg(long)]
    human: PathBuf,
    /// Solve stream produced by `pose-ik solve`.
    #[arg(long)]
    robot_solution: PathBuf,
    /// Pose accuracy threshold (squared radians).
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// ROI spec file (JSON); defaults to the task's built-in placement.
    #[arg(long)]
    roi: Option<PathBuf>,
    /// Emit a CSV row instead of the JSON report.
    #[arg(long)]
    csv: bool,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    let output = run_experiment(&cfg)?;
    let mut written = emit_report(&output.report, &cfg.output_dir)?;
    written.extend(emit_plot_data(&output.report, &cfg.output_dir)?);
    written.push(emit_timing(&output.timings, &cfg.output_dir)?);
    let failed = output
        .report
        .rows
        .iter()
        .filter(|r| r.error.is_some())
        .count();
    println!(
        "{} rows ({} failed), {} method means",
        output.report.rows.len(),
        failed,
        output.report.method_means.len()
    );
    for m in &output.report.method_means {
        println!(
            "  {}@{}: pacc {:.4} po {:.4} convergence {:.3}",
            m.method, m.eta, m.pacc_mean, m.po_mean, m.convergence_rate
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let task = TaskLabel::from_str(&args.task).map_err(config_err)?;
    if args.n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(runtime_err)?;
    for i in 0..args.n {
        let demo = synth_demo(task, args.frames, args.seed + i as u64).map_err(config_err)?;
        let path = args.out.join(format!("{task}_{i:02}.jsonl"));
        save_trajectory(&demo, &path).map_err(runtime_err)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let mode = SolverMode::from_str(&args.method).map_err(config_err)?;
    let eta = SofteningFactor::new(args.eta).map_err(config_err)?;
    let def = RobotDefinition::load(&args.robot).map_err(config_err)?;
    let traj = load_trajectory(&args.traj).map_err(config_err)?;

    let smoothed = exponential_smooth(&traj, args.alpha).map_err(config_err)?;
    let tf = def
        .transform
        .clone()
        .unwrap_or_else(WorkspaceTransform::identity);
    let retargeted = to_robot_frame(&smoothed, &tf);

    let mut targets = Vec::with_capacity(retargeted.len());
    let mut constraints = Vec::with_capacity(retargeted.len());
    for (i, frame) in retargeted.frames().iter().enumerate() {
        let human = extract_human_pose(frame.shoulder, frame.elbow, frame.wrist)
            .map_err(|e| CliError::Runtime(format!("frame {i}: {e}")))?;
        constraints.push(
            map_to_robot(&human, &def).map_err(|e| CliError::Runtime(format!("frame {i}: {e}")))?,
        );
        targets.push(frame.wrist);
    }
    let solver_cfg = SolverConfig {
        mode,
        max_iterations: args.max_iterations,
        position_tolerance: args.tolerance,
        eta,
    };
    let solutions =
        solve_trajectory(&def, &targets, Some(&constraints), &solver_cfg).map_err(runtime_err)?;

    let (shoulder, elbow, wrist) = def.marked.one_based();
    let header = SolveStreamHeader {
        robot: def.name.clone(),
        task: retargeted.task,
        arm: retargeted.arm,
        method: mode,
        eta: solver_cfg.effective_eta().value(),
        alpha: args.alpha,
        transform: tf,
        constrained_joints: MarkedRef {
            shoulder,
            elbow,
            wrist,
        },
        max_reach: def.max_reach(),
        max_iterations: solver_cfg.max_iterations,
        position_tolerance: solver_cfg.position_tolerance,
        frame_count: solutions.len(),
    };
    let frames: Vec<SolveStreamFrame> = solutions
        .into_iter()
        .zip(retargeted.frames())
        .zip(&targets)
        .map(|((solution, frame), target)| SolveStreamFrame {
            t: frame.t,
            target: *target,
            solution,
        })
        .collect();
    print!("{}", solve_stream_to_jsonl(&header, &frames));
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.robot_solution)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.robot_solution.display())))?;
    let (header, frames) =
        parse_solve_stream(&text, &args.robot_solution.display().to_string())?;

    let human = load_trajectory(&args.human).map_err(config_err)?;
    let smoothed = exponential_smooth(&human, header.alpha).map_err(config_err)?;
    let retargeted = to_robot_frame(&smoothed, &header.transform);
    if retargeted.len() != frames.len() {
        return Err(CliError::Config(format!(
            "human trajectory has {} frames but the solve stream has {}",
            retargeted.len(),
            frames.len()
        )));
    }

    let mut human_angles = Vec::with_capacity(frames.len());
    let mut wrists = Vec::with_capacity(frames.len());
    for (i, frame) in retargeted.frames().iter().enumerate() {
        human_angles.push(
            pose_angle(frame.shoulder, frame.elbow, frame.wrist)
                .map_err(|e| CliError::Runtime(format!("frame {i}: {e}")))?,
        );
        wrists.push(frame.wrist);
    }
    let human_series =
        PoseAngleSeries::new(AngleSource::Human, human_angles).map_err(runtime_err)?;

    let marked = (
        header.constrained_joints.shoulder - 1,
        header.constrained_joints.elbow - 1,
        header.constrained_joints.wrist - 1,
    );
    let mut robot_angles = Vec::with_capacity(frames.len());
    let mut per_frame_links = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        robot_angles.push(
            chain_pose_angle(&frame.solution.chain, marked)
                .map_err(|e| CliError::Runtime(format!("frame {i}: {e}")))?,
        );
        per_frame_links.push(frame.solution.chain.links().collect::<Vec<_>>());
    }
    let robot_series =
        PoseAngleSeries::new(AngleSource::Robot, robot_angles).map_err(runtime_err)?;

    let roi: Roi = match &args.roi {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let spec: RoiSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            spec.resolve(header.max_reach).map_err(config_err)?
        }
        None => default_roi(header.task, &header.transform, header.max_reach),
    };

    let report = MetricsReport::compute(
        &human_series,
        &robot_series,
        args.delta,
        &per_frame_links,
        &wrists,
        &roi,
    )
    .map_err(runtime_err)?;

    if args.csv {
        println!("{}", MetricsReport::csv_header());
        println!(
            "{}",
            report.csv_row(
                header.task.as_str(),
                &header.robot,
                header.method.as_str(),
                header.eta
            )
        );
    } else {
        let json = serde_json::to_string_pretty(&report).map_err(runtime_err)?;
        println!("{json}");
    }
    Ok(())
}
