//! Experiment harness: wires ingestion, constraint extraction and mapping,
//! solving, and metrics into deterministic report and plot-data files.
//!
//! Rows are one (robot, trajectory, method, eta) combination each. Report
//! emission is byte-stable for a fixed (config, seed); wall-clock timings go
//! to a separate sidecar file so the main outputs stay reproducible.

use crate::chain::{ChainError, RobotDefinition};
use crate::constraints::{extract_human_pose, map_to_robot, PoseConstraintSet, SofteningFactor};
use crate::geom::Vec3;
use crate::ingest::{
    exponential_smooth, load_trajectory, synth_demo, to_robot_frame, Arm, IngestError,
    SkeletonTrajectory, TaskLabel, WorkspaceTransform, DEFAULT_ALPHA,
};
use crate::metrics::{
    chain_pose_angle, pose_accuracy, pose_angle, task_po, AngleSource, MetricsError,
    PoseAngleSeries, Roi, DEFAULT_DELTA,
};
use crate::solver::{solve_trajectory, Solution, SolverConfig, SolverMode};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("every experiment row failed; first error: {0}")]
    AllRowsFailed(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Iteration budget and positional tolerance shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub position_tolerance: f64,
}

fn default_max_iterations() -> usize {
    20
}

fn default_tolerance() -> f64 {
    1e-3
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            position_tolerance: default_tolerance(),
        }
    }
}

/// Synthetic demonstration suite specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_synth_tasks")]
    pub tasks: Vec<TaskLabel>,
    #[serde(default = "default_demos_per_task")]
    pub demos_per_task: usize,
    #[serde(default = "default_synth_frames")]
    pub frames: usize,
}

fn default_synth_tasks() -> Vec<TaskLabel> {
    TaskLabel::ALL_SYNTH.to_vec()
}

fn default_demos_per_task() -> usize {
    10
}

fn default_synth_frames() -> usize {
    120
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            tasks: default_synth_tasks(),
            demos_per_task: default_demos_per_task(),
            frames: default_synth_frames(),
        }
    }
}

/// ROI description in a config file. Missing extents resolve to the robot's
/// maximum reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub origin: Vec3,
    pub u: Vec3,
    pub normal: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl RoiSpec {
    pub fn resolve(&self, max_reach: f64) -> Result<Roi, MetricsError> {
        Roi::new(
            self.origin,
            self.u,
            self.normal,
            self.width.unwrap_or(max_reach),
            self.height.unwrap_or(max_reach),
        )
    }
}

/// Built-in ROI placement per task.
///
/// Task planes are anchored in capture space (bottom-center of the rectangle
/// on the table plane) and mapped into the robot workspace through the
/// robot's transform. The incision pad is a fixed 20 x 15 rectangle on a
/// vertical plane facing the chain base; assembly planes sit at the task's
/// alignment side and are sized to the robot's reach.
pub fn default_roi(task: TaskLabel, tf: &WorkspaceTransform, max_reach: f64) -> Roi {
    let (bottom_center, u, normal, width, height) = match task {
        TaskLabel::IncisionStraight | TaskLabel::IncisionCurve => (
            Vec3::new(0.0, 35.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            20.0,
            15.0,
        ),
        TaskLabel::Assembly1 => (
            Vec3::new(28.0, 25.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            max_reach,
            max_reach,
        ),
        TaskLabel::Assembly2 | TaskLabel::Other => (
            Vec3::new(0.0, 30.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            max_reach,
            max_reach,
        ),
        TaskLabel::Assembly3 => (
            Vec3::new(-28.0, 25.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            max_reach,
            max_reach,
        ),
    };
    let flip = |v: Vec3| {
        let s = tf.axis_signs();
        Vec3::new(s[0] as f64 * v.x, s[1] as f64 * v.y, s[2] as f64 * v.z)
    };
    let u_r = flip(u);
    let n_r = flip(normal);
    let origin = tf.apply(bottom_center) - u_r * (width / 2.0);
    Roi::new(origin, u_r, n_r, width, height).expect("built-in ROI is valid")
}

/// Full experiment description, mirroring the `pose-ik run` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub robots: Vec<PathBuf>,
    #[serde(default)]
    pub trajectories: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    pub methods: Vec<SolverMode>,
    #[serde(default = "default_etas")]
    pub etas: Vec<u8>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub smoothing_alpha: f64,
    #[serde(default)]
    pub solver: SolverParams,
    /// Per-task ROI overrides, keyed by task label.
    #[serde(default)]
    pub rois: BTreeMap<String, RoiSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_etas() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Load a config file; relative robot and trajectory paths resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.robots = cfg.robots.iter().map(|p| rebase(base, p)).collect();
            cfg.trajectories = cfg.trajectories.iter().map(|p| rebase(base, p)).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.robots.is_empty() {
            return Err(ExperimentError::Config("no robots configured".into()));
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::Config("no methods configured".into()));
        }
        let synth_tasks = self.synth.as_ref().map_or(0, |s| {
            s.tasks.len() * s.demos_per_task
        });
        if self.trajectories.is_empty() && synth_tasks == 0 {
            return Err(ExperimentError::Config(
                "no input trajectories (files or synth)".into(),
            ));
        }
        if let Some(s) = &self.synth {
            if s.frames < 2 {
                return Err(ExperimentError::Config(
                    "synth.frames must be at least 2".into(),
                ));
            }
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ExperimentError::Config(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(ExperimentError::Config(format!(
                "smoothing_alpha must be in (0, 1], got {}",
                self.smoothing_alpha
            )));
        }
        if self.methods.contains(&SolverMode::Pics) {
            if self.etas.is_empty() {
                return Err(ExperimentError::Config(
                    "pics requested but no etas configured".into(),
                ));
            }
            for &eta in &self.etas {
                if !(1..=3).contains(&eta) {
                    return Err(ExperimentError::Config(format!(
                        "eta must be in 1..=3, got {eta}"
                    )));
                }
            }
        }
        if self.solver.max_iterations == 0 {
            return Err(ExperimentError::Config("max_iterations must be >= 1".into()));
        }
        if !(self.solver.position_tolerance.is_finite() && self.solver.position_tolerance > 0.0) {
            return Err(ExperimentError::Config(
                "position_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Numeric outcome of one successful row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub pacc: f64,
    pub po: f64,
    pub mean_residual: f64,
    pub convergence_rate: f64,
    pub mean_iterations: f64,
    pub frames: usize,
    pub frames_gated: usize,
}

/// One (robot, trajectory, method, eta) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub robot: String,
    pub task: String,
    pub demo: String,
    pub method: String,
    pub eta: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RowMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportRow {
    fn sort_key(&self) -> (String, String, String, String, u8) {
        (
            self.robot.clone(),
            self.task.clone(),
            self.demo.clone(),
            self.method.clone(),
            self.eta,
        )
    }
}

/// Aggregate means over the successful rows of one (method, eta) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMean {
    pub method: String,
    pub eta: u8,
    pub rows: usize,
    pub pacc_mean: f64,
    pub pacc_std: f64,
    pub po_mean: f64,
    pub po_std: f64,
    pub mean_residual: f64,
    pub convergence_rate: f64,
    pub mean_iterations: f64,
}

/// Deterministic experiment outcome: per-row metrics plus method means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub method_means: Vec<MethodMean>,
}

/// Wall-clock sidecar, kept out of the deterministic report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTiming {
    pub robot: String,
    pub task: String,
    pub demo: String,
    pub method: String,
    pub eta: u8,
    pub frames: usize,
    pub wall_clock_ms_per_frame: f64,
}

/// Report plus measured timings.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub timings: Vec<RowTiming>,
}

fn mix_seed(base: u64, task_idx: u64, demo_idx: u64) -> u64 {
    let mut z = base
        ^ task_idx.wrapping_mul(0xA24B_AED4_963E_E407)
        ^ demo_idx.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct DemoInput {
    demo: String,
    trajectory: SkeletonTrajectory,
}

fn collect_inputs(cfg: &ExperimentConfig) -> Result<Vec<DemoInput>, ExperimentError> {
    let mut inputs = Vec::new();
    for path in &cfg.trajectories {
        let trajectory = load_trajectory(path)?;
        let demo = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        inputs.push(DemoInput { demo, trajectory });
    }
    if let Some(synth) = &cfg.synth {
        for (task_idx, &task) in synth.tasks.iter().enumerate() {
            for demo_idx in 0..synth.demos_per_task {
                let seed = mix_seed(cfg.seed, task_idx as u64, demo_idx as u64);
                let trajectory = synth_demo(task, synth.frames, seed)?;
                inputs.push(DemoInput {
                    demo: format!("{task}-{demo_idx:02}"),
                    trajectory,
                });
            }
        }
    }
    Ok(inputs)
}

/// Preprocessed per-demo data shared by every method row.
struct PreparedDemo {
    targets: Vec<Vec3>,
    constraints: Vec<PoseConstraintSet>,
    human_angles: PoseAngleSeries,
    roi: Roi,
}

fn prepare_demo(
    def: &RobotDefinition,
    traj: &SkeletonTrajectory,
    cfg: &ExperimentConfig,
) -> Result<PreparedDemo, String> {
    let smoothed = exponential_smooth(traj, cfg.smoothing_alpha).map_err(|e| e.to_string())?;
    let tf = def
        .transform
        .clone()
        .unwrap_or_else(WorkspaceTransform::identity);
    let retargeted = to_robot_frame(&smoothed, &tf);

    let mut targets = Vec::with_capacity(retargeted.len());
    let mut constraints = Vec::with_capacity(retargeted.len());
    let mut angles = Vec::with_capacity(retargeted.len());
    for (i, frame) in retargeted.frames().iter().enumerate() {
        let human = extract_human_pose(frame.shoulder, frame.elbow, frame.wrist)
            .map_err(|e| format!("frame {i}: {e}"))?;
        constraints.push(map_to_robot(&human, def).map_err(|e| format!("frame {i}: {e}"))?);
        targets.push(frame.wrist);
        angles.push(
            pose_angle(frame.shoulder, frame.elbow, frame.wrist)
                .map_err(|e| format!("frame {i}: {e}"))?,
        );
    }
    let human_angles =
        PoseAngleSeries::new(AngleSource::Human, angles).map_err(|e| e.to_string())?;
    let roi = match cfg.rois.get(traj.task.as_str()) {
        Some(spec) => spec.resolve(def.max_reach()).map_err(|e| e.to_string())?,
        None => default_roi(traj.task, &tf, def.max_reach()),
    };
    Ok(PreparedDemo {
        targets,
        constraints,
        human_angles,
        roi,
    })
}

fn run_row(
    def: &RobotDefinition,
    prepared: &PreparedDemo,
    mode: SolverMode,
    eta: SofteningFactor,
    cfg: &ExperimentConfig,
) -> Result<(RowMetrics, f64), String> {
    let solver_cfg = SolverConfig {
        mode,
        max_iterations: cfg.solver.max_iterations,
        position_tolerance: cfg.solver.position_tolerance,
        eta,
    };
    let started = Instant::now();
    let solutions = solve_trajectory(
        def,
        &prepared.targets,
        Some(&prepared.constraints),
        &solver_cfg,
    )
    .map_err(|e| e.to_string())?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let marked = (
        def.marked.shoulder(),
        def.marked.elbow(),
        def.marked.wrist(),
    );
    let robot_angles: Result<Vec<f64>, _> = solutions
        .iter()
        .map(|s| chain_pose_angle(&s.chain, marked))
        .collect();
    let robot_angles = PoseAngleSeries::new(AngleSource::Robot, robot_angles.map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;

    let pacc = pose_accuracy(&prepared.human_angles, &robot_angles, cfg.delta)
        .map_err(|e| e.to_string())?;
    let po = task_po(&solutions, &prepared.targets, &prepared.roi).map_err(|e| e.to_string())?;
    let gated = crate::metrics::gate_frames(&prepared.targets, &prepared.roi)
        .iter()
        .filter(|g| **g)
        .count();

    let n = solutions.len() as f64;
    let mean_residual = solutions.iter().map(|s| s.residual).sum::<f64>() / n;
    let convergence_rate = solutions.iter().filter(|s| s.converged).count() as f64 / n;
    let mean_iterations = solutions.iter().map(|s| s.iterations_used as f64).sum::<f64>() / n;

    Ok((
        RowMetrics {
            pacc,
            po,
            mean_residual,
            convergence_rate,
            mean_iterations,
            frames: solutions.len(),
            frames_gated: gated,
        },
        elapsed_ms / n,
    ))
}

fn method_combos(cfg: &ExperimentConfig) -> Vec<(SolverMode, SofteningFactor)> {
    let mut combos = Vec::new();
    for &method in &cfg.methods {
        match method {
            SolverMode::Fabrik | SolverMode::Pic => {
                combos.push((method, SofteningFactor::NONE));
            }
            SolverMode::Pics => {
                for &eta in &cfg.etas {
                    combos.push((
                        method,
                        SofteningFactor::new(eta).expect("validated eta"),
                    ));
                }
            }
        }
    }
    combos
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

fn compute_method_means(rows: &[ReportRow]) -> Vec<MethodMean> {
    let mut groups: BTreeMap<(String, u8), Vec<&RowMetrics>> = BTreeMap::new();
    for row in rows {
        if let Some(metrics) = &row.metrics {
            groups
                .entry((row.method.clone(), row.eta))
                .or_default()
                .push(metrics);
        }
    }
    groups
        .into_iter()
        .map(|((method, eta), metrics)| {
            let n = metrics.len() as f64;
            let paccs: Vec<f64> = metrics.iter().map(|m| m.pacc).collect();
            let pos: Vec<f64> = metrics.iter().map(|m| m.po).collect();
            let pacc_mean = paccs.iter().sum::<f64>() / n;
            let po_mean = pos.iter().sum::<f64>() / n;
            MethodMean {
                method,
                eta,
                rows: metrics.len(),
                pacc_mean,
                pacc_std: population_std(&paccs, pacc_mean),
                po_mean,
                po_std: population_std(&pos, po_mean),
                mean_residual: metrics.iter().map(|m| m.mean_residual).sum::<f64>() / n,
                convergence_rate: metrics.iter().map(|m| m.convergence_rate).sum::<f64>() / n,
                mean_iterations: metrics.iter().map(|m| m.mean_iterations).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Run the full pipeline for every (robot x trajectory x method x eta)
/// combination. Row failures are recorded in the report; the run fails only
/// when every row does.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    let mut defs = Vec::new();
    for path in &cfg.robots {
        defs.push(RobotDefinition::load(path)?);
    }
    let inputs = collect_inputs(cfg)?;
    let combos = method_combos(cfg);

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut first_error: Option<String> = None;
    for def in &defs {
        for input in &inputs {
            let prepared = prepare_demo(def, &input.trajectory, cfg);
            for &(mode, eta) in &combos {
                let mut row = ReportRow {
                    robot: def.name.clone(),
                    task: input.trajectory.task.as_str().to_string(),
                    demo: input.demo.clone(),
                    method: mode.as_str().to_string(),
                    eta: eta.value(),
                    metrics: None,
                    error: None,
                };
                match &prepared {
                    Ok(prep) => match run_row(def, prep, mode, eta, cfg) {
                        Ok((metrics, ms_per_frame)) => {
                            timings.push(RowTiming {
                                robot: row.robot.clone(),
                                task: row.task.clone(),
                                demo: row.demo.clone(),
                                method: row.method.clone(),
                                eta: row.eta,
                                frames: metrics.frames,
                                wall_clock_ms_per_frame: ms_per_frame,
                            });
                            row.metrics = Some(metrics);
                        }
                        Err(e) => {
                            first_error.get_or_insert_with(|| e.clone());
                            row.error = Some(e);
                        }
                    },
                    Err(e) => {
                        first_error.get_or_insert_with(|| e.clone());
                        row.error = Some(e.clone());
                    }
                }
                rows.push(row);
            }
        }
    }
    rows.sort_by_key(|r| r.sort_key());
    timings.sort_by_key(|t| {
        (
            t.robot.clone(),
            t.task.clone(),
            t.demo.clone(),
            t.method.clone(),
            t.eta,
        )
    });
    if rows.iter().all(|r| r.metrics.is_none()) {
        return Err(ExperimentError::AllRowsFailed(
            first_error.unwrap_or_else(|| "no rows produced".into()),
        ));
    }
    let method_means = compute_method_means(&rows);
    Ok(ExperimentOutput {
        report: ExperimentReport { rows, method_means },
        timings,
    })
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Fixed column order of `report.csv`.
pub const REPORT_CSV_HEADER: &str =
    "robot,task,demo,method,eta,pacc,po,mean_residual,convergence_rate,mean_iterations,frames,frames_gated,error";

/// Fixed column order of `method_means.csv`.
pub const MEANS_CSV_HEADER: &str =
    "method,eta,rows,pacc_mean,pacc_std,po_mean,po_std,mean_residual,convergence_rate,mean_iterations";

/// Render the per-row CSV. The header row is always present.
pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        match &row.metrics {
            Some(m) => {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},",
                    row.robot,
                    row.task,
                    row.demo,
                    row.method,
                    row.eta,
                    m.pacc,
                    m.po,
                    m.mean_residual,
                    m.convergence_rate,
                    m.mean_iterations,
                    m.frames,
                    m.frames_gated
                )
                .expect("write to string");
            }
            None => {
                writeln!(
                    out,
                    "{},{},{},{},{},,,,,,,,{}",
                    row.robot,
                    row.task,
                    row.demo,
                    row.method,
                    row.eta,
                    csv_quote(row.error.as_deref().unwrap_or("unknown"))
                )
                .expect("write to string");
            }
        }
    }
    out
}

/// Render the method-mean CSV.
pub fn means_to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(MEANS_CSV_HEADER);
    out.push('\n');
    for m in &report.method_means {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            m.method,
            m.eta,
            m.rows,
            m.pacc_mean,
            m.pacc_std,
            m.po_mean,
            m.po_std,
            m.mean_residual,
            m.convergence_rate,
            m.mean_iterations
        )
        .expect("write to string");
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Write `report.csv`, `method_means.csv` and `report.json`. Byte-stable for
/// a given report.
pub fn emit_report(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    written.push(write_file(dir, "report.csv", &report_to_csv(report))?);
    written.push(write_file(dir, "method_means.csv", &means_to_csv(report))?);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    written.push(write_file(dir, "report.json", &format!("{json}\n"))?);
    Ok(written)
}

/// Write the wall-clock sidecar (`timing.csv`). Not byte-stable across runs.
pub fn emit_timing(
    timings: &[RowTiming],
    dir: impl AsRef<Path>,
) -> Result<PathBuf, ExperimentError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = String::from("robot,task,demo,method,eta,frames,wall_clock_ms_per_frame\n");
    for t in timings {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.robot, t.task, t.demo, t.method, t.eta, t.frames, t.wall_clock_ms_per_frame
        )
        .expect("write to string");
    }
    write_file(dir, "timing.csv", &out)
}

/// One softening level's aggregate in a plot series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub eta: u8,
    pub mean: f64,
    pub std: f64,
    pub rows: usize,
}

/// FABRIK reference aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotReference {
    pub mean: f64,
    pub std: f64,
    pub rows: usize,
}

/// Mean +/- std of one metric per softening level (eta 0 is PIC), plus the
/// FABRIK reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub metric: String,
    pub series: Vec<PlotPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fabrik: Option<PlotReference>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn build_series(report: &ExperimentReport, metric: &str) -> PlotSeries {
    let pick = |m: &RowMetrics| -> f64 {
        match metric {
            "pacc" => m.pacc,
            _ => m.po,
        }
    };
    let mut series = Vec::new();
    let mut missing = Vec::new();
    for eta in 0u8..=3 {
        let method = if eta == 0 { "pic" } else { "pics" };
        let values: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.method == method && r.eta == eta)
            .filter_map(|r| r.metrics.as_ref().map(&pick))
            .collect();
        if values.is_empty() {
            missing.push(eta);
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        series.push(PlotPoint {
            eta,
            mean,
            std: population_std(&values, mean),
            rows: values.len(),
        });
    }
    let fabrik_values: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.method == "fabrik")
        .filter_map(|r| r.metrics.as_ref().map(&pick))
        .collect();
    let fabrik = if fabrik_values.is_empty() {
        None
    } else {
        let mean = fabrik_values.iter().sum::<f64>() / fabrik_values.len() as f64;
        Some(PlotReference {
            mean,
            std: population_std(&fabrik_values, mean),
            rows: fabrik_values.len(),
        })
    };
    let complete = missing.is_empty() && fabrik.is_some();
    let warning = if complete {
        None
    } else {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            let levels: Vec<String> = missing.iter().map(|e| e.to_string()).collect();
            parts.push(format!("missing softening levels: {}", levels.join(",")));
        }
        if fabrik.is_none() {
            parts.push("missing fabrik reference".into());
        }
        Some(parts.join("; "))
    };
    PlotSeries {
        metric: metric.to_string(),
        series,
        fabrik,
        complete,
        warning,
    }
}

/// Write `plot_pacc.json` and `plot_po.json`: one point per softening level
/// plus the FABRIK reference, ready for external plotting.
pub fn emit_plot_data(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for metric in ["pacc", "po"] {
        let series = build_series(report, metric);
        let json = serde_json::to_string_pretty(&series).expect("series serializes");
        written.push(write_file(
            dir,
            &format!("plot_{metric}.json"),
            &format!("{json}\n"),
        )?);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Solve stream (the `pose-ik solve` / `pose-ik metrics` wire format)
// ---------------------------------------------------------------------------

/// 1-based marked joints as serialized in streams and definition files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedRef {
    pub shoulder: usize,
    pub elbow: usize,
    pub wrist: usize,
}

/// First line of a solve stream: everything needed to rescore it later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStreamHeader {
    pub robot: String,
    pub task: TaskLabel,
    pub arm: Arm,
    pub method: SolverMode,
    pub eta: u8,
    pub alpha: f64,
    pub transform: WorkspaceTransform,
    pub constrained_joints: MarkedRef,
    pub max_reach: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub frame_count: usize,
}

/// One line per frame of a solve stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStreamFrame {
    pub t: f64,
    pub target: Vec3,
    pub solution: Solution,
}

/// Serialize a solve stream: header line, then one frame per line.
pub fn solve_stream_to_jsonl(header: &SolveStreamHeader, frames: &[SolveStreamFrame]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for frame in frames {
        out.push_str(&serde_json::to_string(frame).expect("frame serializes"));
        out.push('\n');
    }
    out
}

/// Parse a solve stream produced by [`solve_stream_to_jsonl`].
pub fn parse_solve_stream(
    text: &str,
    path: &str,
) -> Result<(SolveStreamHeader, Vec<SolveStreamFrame>), ExperimentError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| ExperimentError::Config(format!("{path}: empty solve stream")))?;
    let header: SolveStreamHeader = serde_json::from_str(header_line)
        .map_err(|e| ExperimentError::Config(format!("{path}:1: bad stream header: {e}")))?;
    let mut frames = Vec::new();
    for (line_no, line) in lines {
        let frame: SolveStreamFrame = serde_json::from_str(line).map_err(|e| {
            ExperimentError::Config(format!("{path}:{}: bad stream frame: {e}", line_no + 1))
        })?;
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(ExperimentError::Config(format!(
            "{path}: solve stream has no frames"
        )));
    }
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            robots: vec![dir.join("robot.json")],
            trajectories: vec![],
            synth: Some(SynthSpec {
                tasks: vec![TaskLabel::IncisionStraight],
                demos_per_task: 2,
                frames: 30,
            }),
            methods: vec![SolverMode::Fabrik, SolverMode::Pic, SolverMode::Pics],
            etas: vec![1, 3],
            delta: DEFAULT_DELTA,
            smoothing_alpha: 0.3,
            solver: SolverParams::default(),
            rois: BTreeMap::new(),
            seed: 7,
            output_dir: dir.join("out"),
        }
    }

    fn write_test_robot(dir: &Path) {
        let text = r#"{
            "name": "rig",
            "base": [0.0, 0.0, 0.0],
            "link_lengths": [14.0, 14.0, 12.0, 10.0, 8.0, 8.0],
            "constrained_joints": {"shoulder": 2, "elbow": 3, "wrist": 5}
        }"#;
        std::fs::write(dir.join("robot.json"), text).unwrap();
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "pose-ik-core-test-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn config_validation_catches_empty_methods() {
        let dir = temp_dir("cfg");
        let mut cfg = synth_config(&dir);
        cfg.methods.clear();
        assert!(matches!(
            cfg.validate(),
            Err(ExperimentError::Config(m)) if m.contains("methods")
        ));
        let mut cfg = synth_config(&dir);
        cfg.synth = None;
        assert!(cfg.validate().is_err());
        let mut cfg = synth_config(&dir);
        cfg.etas = vec![4];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn experiment_runs_and_aggregates_match_rows() {
        let dir = temp_dir("run");
        write_test_robot(&dir);
        let cfg = synth_config(&dir);
        let output = run_experiment(&cfg).unwrap();
        let report = &output.report;
        // 1 robot x 2 demos x (fabrik + pic + pics@1 + pics@3) = 8 rows
        assert_eq!(report.rows.len(), 8);
        assert!(report.rows.iter().all(|r| r.metrics.is_some()));
        for mean in &report.method_means {
            let rows: Vec<&RowMetrics> = report
                .rows
                .iter()
                .filter(|r| r.method == mean.method && r.eta == mean.eta)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            assert_eq!(rows.len(), mean.rows);
            let pacc = rows.iter().map(|m| m.pacc).sum::<f64>() / rows.len() as f64;
            let po = rows.iter().map(|m| m.po).sum::<f64>() / rows.len() as f64;
            assert!((pacc - mean.pacc_mean).abs() < 1e-12);
            assert!((po - mean.po_mean).abs() < 1e-12);
        }
        assert_eq!(output.timings.len(), 8);
    }

    #[test]
    fn emitted_files_are_byte_stable() {
        let dir = temp_dir("emit");
        write_test_robot(&dir);
        let cfg = synth_config(&dir);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.report, b.report);

        let out_a = dir.join("out_a");
        let out_b = dir.join("out_b");
        emit_report(&a.report, &out_a).unwrap();
        emit_plot_data(&a.report, &out_a).unwrap();
        emit_report(&b.report, &out_b).unwrap();
        emit_plot_data(&b.report, &out_b).unwrap();
        for name in [
            "report.csv",
            "method_means.csv",
            "report.json",
            "plot_pacc.json",
            "plot_po.json",
        ] {
            let ba = std::fs::read(out_a.join(name)).unwrap();
            let bb = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(ba, bb, "{name} differs between identical runs");
        }
        // header row present even when the report is empty of rows
        let empty = ExperimentReport {
            rows: vec![],
            method_means: vec![],
        };
        assert!(report_to_csv(&empty).starts_with(REPORT_CSV_HEADER));
    }

    #[test]
    fn report_json_round_trips() {
        let dir = temp_dir("json");
        write_test_robot(&dir);
        let cfg = synth_config(&dir);
        let output = run_experiment(&cfg).unwrap();
        let json = serde_json::to_string(&output.report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, output.report);
    }

    #[test]
    fn plot_series_covers_all_levels_or_warns() {
        let dir = temp_dir("plot");
        write_test_robot(&dir);
        let cfg = synth_config(&dir);
        let output = run_experiment(&cfg).unwrap();
        let series = build_series(&output.report, "pacc");
        // etas 1 and 3 configured: eta 2 missing
        assert!(!series.complete);
        assert!(series.warning.as_deref().unwrap().contains("2"));
        assert_eq!(series.series.len(), 3); // eta 0 (pic), 1, 3
        assert!(series.fabrik.is_some());

        let mut cfg_full = cfg.clone();
        cfg_full.etas = vec![1, 2, 3];
        let output = run_experiment(&cfg_full).unwrap();
        let series = build_series(&output.report, "po");
        assert!(series.complete);
        assert_eq!(series.series.len(), 4);
        // recompute one point from raw rows
        let eta2: Vec<f64> = output
            .report
            .rows
            .iter()
            .filter(|r| r.method == "pics" && r.eta == 2)
            .map(|r| r.metrics.as_ref().unwrap().po)
            .collect();
        let mean = eta2.iter().sum::<f64>() / eta2.len() as f64;
        let point = series.series.iter().find(|p| p.eta == 2).unwrap();
        assert!((point.mean - mean).abs() < 1e-12);
        // single-demo runs have zero std
        let mut cfg_single = cfg_full.clone();
        cfg_single.synth = Some(SynthSpec {
            tasks: vec![TaskLabel::IncisionStraight],
            demos_per_task: 1,
            frames: 30,
        });
        let output = run_experiment(&cfg_single).unwrap();
        let series = build_series(&output.report, "pacc");
        for point in &series.series {
            assert_eq!(point.std, 0.0);
        }
    }

    #[test]
    fn solve_stream_round_trips() {
        use crate::chain::MarkedJoints;
        let def = RobotDefinition {
            name: "r".into(),
            base: Vec3::ZERO,
            link_lengths: vec![1.0, 1.0, 1.0],
            marked: MarkedJoints::from_one_based(1, 2, 4, 4).unwrap(),
            rest_directions: None,
            transform: None,
        };
        let cfg = SolverConfig::pic();
        let targets = [Vec3::new(1.0, 1.0, 0.5), Vec3::new(1.1, 0.9, 0.6)];
        let human = extract_human_pose(
            Vec3::ZERO,
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 0.5, 1.5),
        )
        .unwrap();
        let mapped = map_to_robot(&human, &def).unwrap();
        let solutions =
            solve_trajectory(&def, &targets, Some(&[mapped, mapped]), &cfg).unwrap();
        let header = SolveStreamHeader {
            robot: "r".into(),
            task: TaskLabel::Other,
            arm: Arm::Right,
            method: SolverMode::Pic,
            eta: 0,
            alpha: 0.3,
            transform: WorkspaceTransform::identity(),
            constrained_joints: MarkedRef {
                shoulder: 1,
                elbow: 2,
                wrist: 4,
            },
            max_reach: 3.0,
            max_iterations: cfg.max_iterations,
            position_tolerance: cfg.position_tolerance,
            frame_count: 2,
        };
        let frames: Vec<SolveStreamFrame> = solutions
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (solution, target))| SolveStreamFrame {
                t: i as f64 / 30.0,
                target,
                solution,
            })
            .collect();
        let text = solve_stream_to_jsonl(&header, &frames);
        let (h2, f2) = parse_solve_stream(&text, "<test>").unwrap();
        assert_eq!(h2, header);
        assert_eq!(f2, frames);
    }
}
