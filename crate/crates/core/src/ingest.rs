//! Demonstration loading, exponential smoothing, the human-to-robot
//! workspace transform, and seeded synthetic demonstrations.
//!
//! Trajectory files are JSON Lines with one frame per line and an optional
//! header line carrying the task label and units. Synthetic demonstrations
//! stand in for captured ones: a two-link arm (upper arm 30, forearm 28
//! units) sweeps task-specific wrist paths, deterministically per seed.

use crate::geom::Vec3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Synthetic human upper-arm length (shoulder to elbow), world units.
pub const HUMAN_UPPER_ARM: f64 = 30.0;

/// Synthetic human forearm length (elbow to wrist), world units.
pub const HUMAN_FOREARM: f64 = 28.0;

/// Default exponential smoothing constant.
pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("frame {frame}: non-finite coordinate in field {field}")]
    NonFiniteField { frame: usize, field: String },
    #[error("frame {frame}: non-monotone timestamps ({prev} >= {next})")]
    NonMonotoneTimestamps { frame: usize, prev: f64, next: f64 },
    #[error("frame {frame}: arm {found:?} differs from trajectory arm {expected:?}")]
    MixedArms {
        frame: usize,
        expected: Arm,
        found: Arm,
    },
    #[error("smoothing constant must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("axis sign must be -1 or +1, got {0}")]
    BadAxisSign(i8),
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("synthetic demonstrations need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid kind: no synthetic generator for task {0}")]
    InvalidKind(TaskLabel),
    #[error("unknown task label {0:?}")]
    UnknownTask(String),
}

/// Which arm a trajectory captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Left,
    Right,
}

/// Task a demonstration belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskLabel {
    #[serde(rename = "incision-straight")]
    IncisionStraight,
    #[serde(rename = "incision-curve")]
    IncisionCurve,
    #[serde(rename = "assembly-1")]
    Assembly1,
    #[serde(rename = "assembly-2")]
    Assembly2,
    #[serde(rename = "assembly-3")]
    Assembly3,
    #[serde(rename = "other")]
    Other,
}

impl TaskLabel {
    pub const ALL_SYNTH: [TaskLabel; 5] = [
        TaskLabel::IncisionStraight,
        TaskLabel::IncisionCurve,
        TaskLabel::Assembly1,
        TaskLabel::Assembly2,
        TaskLabel::Assembly3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskLabel::IncisionStraight => "incision-straight",
            TaskLabel::IncisionCurve => "incision-curve",
            TaskLabel::Assembly1 => "assembly-1",
            TaskLabel::Assembly2 => "assembly-2",
            TaskLabel::Assembly3 => "assembly-3",
            TaskLabel::Other => "other",
        }
    }

    pub fn is_incision(self) -> bool {
        matches!(self, TaskLabel::IncisionStraight | TaskLabel::IncisionCurve)
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskLabel {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incision-straight" => Ok(TaskLabel::IncisionStraight),
            "incision-curve" => Ok(TaskLabel::IncisionCurve),
            "assembly-1" => Ok(TaskLabel::Assembly1),
            "assembly-2" => Ok(TaskLabel::Assembly2),
            "assembly-3" => Ok(TaskLabel::Assembly3),
            "other" => Ok(TaskLabel::Other),
            other => Err(IngestError::UnknownTask(other.to_string())),
        }
    }
}

/// One time-stamped arm frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmFrame {
    pub t: f64,
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
}

/// A demonstration: non-empty frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTrajectory {
    pub task: TaskLabel,
    pub arm: Arm,
    pub units: Option<String>,
    frames: Vec<ArmFrame>,
}

impl SkeletonTrajectory {
    pub fn new(
        task: TaskLabel,
        arm: Arm,
        units: Option<String>,
        frames: Vec<ArmFrame>,
    ) -> Result<Self, IngestError> {
        if frames.is_empty() {
            return Err(IngestError::EmptyTrajectory);
        }
        for (i, frame) in frames.iter().enumerate() {
            for (field, v) in [
                ("shoulder", frame.shoulder),
                ("elbow", frame.elbow),
                ("wrist", frame.wrist),
            ] {
                for (axis, c) in [("x", v.x), ("y", v.y), ("z", v.z)] {
                    if !c.is_finite() {
                        return Err(IngestError::NonFiniteField {
                            frame: i,
                            field: format!("{field}.{axis}"),
                        });
                    }
                }
            }
            if !frame.t.is_finite() {
                return Err(IngestError::NonFiniteField {
                    frame: i,
                    field: "t".into(),
                });
            }
        }
        for (i, pair) in frames.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(IngestError::NonMonotoneTimestamps {
                    frame: i + 1,
                    prev: pair[0].t,
                    next: pair[1].t,
                });
            }
        }
        Ok(Self {
            task,
            arm,
            units,
            frames,
        })
    }

    pub fn frames(&self) -> &[ArmFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn wrists(&self) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.wrist).collect()
    }

    /// Apply a function to every joint position, keeping timestamps.
    fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|fr| ArmFrame {
                t: fr.t,
                shoulder: f(fr.shoulder),
                elbow: f(fr.elbow),
                wrist: f(fr.wrist),
            })
            .collect();
        Self {
            task: self.task,
            arm: self.arm,
            units: self.units.clone(),
            frames,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    task: TaskLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    t: f64,
    arm: Arm,
    shoulder: Vec3,
    elbow: Vec3,
    wrist: Vec3,
}

/// Parse trajectory text (JSON Lines). `path` is only used in error messages.
pub fn parse_trajectory(text: &str, path: &str) -> Result<SkeletonTrajectory, IngestError> {
    let mut task = TaskLabel::Other;
    let mut units = None;
    let mut arm: Option<Arm> = None;
    let mut frames: Vec<ArmFrame> = Vec::new();
    let mut saw_header = false;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line_no == 0 && !saw_header {
            if let Ok(header) = serde_json::from_str::<HeaderLine>(line) {
                task = header.task;
                units = header.units;
                saw_header = true;
                continue;
            }
        }
        let frame: FrameLine =
            serde_json::from_str(line).map_err(|e| IngestError::Parse {
                path: path.to_string(),
                line: line_no + 1,
                message: e.to_string(),
            })?;
        match arm {
            None => arm = Some(frame.arm),
            Some(expected) if expected != frame.arm => {
                return Err(IngestError::MixedArms {
                    frame: frames.len(),
                    expected,
                    found: frame.arm,
                });
            }
            _ => {}
        }
        frames.push(ArmFrame {
            t: frame.t,
            shoulder: frame.shoulder,
            elbow: frame.elbow,
            wrist: frame.wrist,
        });
    }

    let arm = arm.ok_or(IngestError::EmptyTrajectory)?;
    SkeletonTrajectory::new(task, arm, units, frames)
}

/// Load a trajectory file, rejecting NaN coordinates and non-monotone
/// timestamps.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<SkeletonTrajectory, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trajectory(&text, &path.display().to_string())
}

/// Canonical JSON Lines encoding: header first, then one frame per line.
pub fn trajectory_to_jsonl(traj: &SkeletonTrajectory) -> String {
    let mut out = String::new();
    let header = HeaderLine {
        task: traj.task,
        units: traj.units.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for frame in traj.frames() {
        let line = FrameLine {
            t: frame.t,
            arm: traj.arm,
            shoulder: frame.shoulder,
            elbow: frame.elbow,
            wrist: frame.wrist,
        };
        out.push_str(&serde_json::to_string(&line).expect("frame serializes"));
        out.push('\n');
    }
    out
}

/// Write a trajectory in its canonical file form.
pub fn save_trajectory(
    traj: &SkeletonTrajectory,
    path: impl AsRef<Path>,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(trajectory_to_jsonl(traj).as_bytes())
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Exponential smoothing per joint and coordinate:
/// `s_0 = x_0`, `s_t = alpha * x_t + (1 - alpha) * s_{t-1}`.
/// `alpha = 1` is the identity.
pub fn exponential_smooth(
    traj: &SkeletonTrajectory,
    alpha: f64,
) -> Result<SkeletonTrajectory, IngestError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(IngestError::BadAlpha(alpha));
    }
    let mut frames = traj.frames().to_vec();
    let mut prev = frames[0];
    for frame in frames.iter_mut().skip(1) {
        let blend = |x: f64, s: f64| alpha * x + (1.0 - alpha) * s;
        let blend3 = |x: Vec3, s: Vec3| Vec3::new(blend(x.x, s.x), blend(x.y, s.y), blend(x.z, s.z));
        frame.shoulder = blend3(frame.shoulder, prev.shoulder);
        frame.elbow = blend3(frame.elbow, prev.elbow);
        frame.wrist = blend3(frame.wrist, prev.wrist);
        prev = *frame;
    }
    SkeletonTrajectory::new(traj.task, traj.arm, traj.units.clone(), frames)
}

/// Axis-flip + uniform scale + offset mapping capture coordinates into the
/// robot workspace: `p -> (s_x*a*p.x + t_x, s_y*a*p.y + t_y, s_z*a*p.z + t_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceTransform {
    axis_signs: [i8; 3],
    scale: f64,
    offset: Vec3,
}

impl WorkspaceTransform {
    pub fn new(axis_signs: [i8; 3], scale: f64, offset: Vec3) -> Result<Self, IngestError> {
        for s in axis_signs {
            if s != 1 && s != -1 {
                return Err(IngestError::BadAxisSign(s));
            }
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(IngestError::BadScale(scale));
        }
        Ok(Self {
            axis_signs,
            scale,
            offset,
        })
    }

    pub fn identity() -> Self {
        Self {
            axis_signs: [1, 1, 1],
            scale: 1.0,
            offset: Vec3::ZERO,
        }
    }

    pub fn axis_signs(&self) -> [i8; 3] {
        self.axis_signs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> Vec3 {
        self.offset
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            self.axis_signs[0] as f64 * self.scale * p.x + self.offset.x,
            self.axis_signs[1] as f64 * self.scale * p.y + self.offset.y,
            self.axis_signs[2] as f64 * self.scale * p.z + self.offset.z,
        )
    }
}

impl Default for WorkspaceTransform {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Serialize, Deserialize)]
struct WorkspaceTransformWire {
    #[serde(default = "default_signs")]
    axis_signs: [i8; 3],
    #[serde(default = "default_scale")]
    scale: f64,
    #[serde(default)]
    offset: Vec3,
}

fn default_signs() -> [i8; 3] {
    [1, 1, 1]
}

fn default_scale() -> f64 {
    1.0
}

impl Serialize for WorkspaceTransform {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WorkspaceTransformWire {
            axis_signs: self.axis_signs,
            scale: self.scale,
            offset: self.offset,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WorkspaceTransform {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = WorkspaceTransformWire::deserialize(deserializer)?;
        WorkspaceTransform::new(w.axis_signs, w.scale, w.offset).map_err(serde::de::Error::custom)
    }
}

/// Map every joint of a trajectory into the robot workspace.
pub fn to_robot_frame(traj: &SkeletonTrajectory, tf: &WorkspaceTransform) -> SkeletonTrajectory {
    traj.map_points(|p| tf.apply(p))
}

// ---------------------------------------------------------------------------
// Synthetic demonstrations
// ---------------------------------------------------------------------------

/// Smooth 0..1 ramp (zero slope at both ends).
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Elbow position for a two-link arm reaching from `shoulder` to `wrist`,
/// bending toward `hint`. Link lengths are exact by construction.
fn solve_elbow(shoulder: Vec3, wrist: Vec3, hint: Vec3) -> Vec3 {
    let d_vec = wrist - shoulder;
    let d = d_vec.norm();
    let dir = d_vec * (1.0 / d);
    let a = (HUMAN_UPPER_ARM * HUMAN_UPPER_ARM - HUMAN_FOREARM * HUMAN_FOREARM + d * d)
        / (2.0 * d);
    let h_sq = HUMAN_UPPER_ARM * HUMAN_UPPER_ARM - a * a;
    let h = h_sq.max(0.0).sqrt();
    let mut perp = hint - dir * hint.dot(dir);
    if perp.norm_squared() < 1e-12 {
        // hint parallel to the reach direction; fall back to a fixed axis
        let alt = Vec3::new(1.0, 0.0, 0.0);
        perp = alt - dir * alt.dot(dir);
        if perp.norm_squared() < 1e-12 {
            let alt = Vec3::new(0.0, 1.0, 0.0);
            perp = alt - dir * alt.dot(dir);
        }
    }
    let perp = perp.normalized().expect("non-degenerate bend direction");
    shoulder + dir * a + perp * h
}

/// Clamp a wrist point into the annulus the two-link arm can reach.
fn clamp_reach(shoulder: Vec3, wrist: Vec3) -> Vec3 {
    let max_d = (HUMAN_UPPER_ARM + HUMAN_FOREARM) - 2.0;
    let min_d = (HUMAN_UPPER_ARM - HUMAN_FOREARM) + 4.0;
    let delta = wrist - shoulder;
    let d = delta.norm();
    if d < 1e-9 {
        return shoulder + Vec3::new(0.0, min_d, 0.0);
    }
    let clamped = d.clamp(min_d, max_d);
    shoulder + delta * (clamped / d)
}

struct PathSpec {
    shoulder: Vec3,
    bend_hint: Vec3,
    wrist_at: Box<dyn Fn(f64) -> Vec3>,
}

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    rng.random_range(-amount..=amount)
}

fn jitter3(rng: &mut ChaCha8Rng, amount: f64) -> Vec3 {
    Vec3::new(jitter(rng, amount), jitter(rng, amount), jitter(rng, amount))
}

// Path design rule: the elbow leads the wrist laterally (+x bend hint), so
// every link direction keeps a constant octant within one demonstration and
// the constraint schedule stays stable frame to frame.

fn incision_straight_path(rng: &mut ChaCha8Rng) -> PathSpec {
    // the line tilts in depth so the arm folds progressively along the cut
    let start = Vec3::new(-8.0, 33.0, 3.5) + jitter3(rng, 1.2);
    let end = Vec3::new(8.0, 37.0, 5.5) + jitter3(rng, 1.2);
    PathSpec {
        shoulder: Vec3::new(0.0, 10.0, 38.0) + jitter3(rng, 1.0),
        bend_hint: Vec3::new(0.85, -0.3, -0.45),
        wrist_at: Box::new(move |s| start + (end - start) * smoothstep(s)),
    }
}

fn incision_curve_path(rng: &mut ChaCha8Rng) -> PathSpec {
    let center = Vec3::new(0.0, 35.0, 3.5) + jitter3(rng, 1.0);
    let radius = rng.random_range(5.5..7.5);
    let e1 = Vec3::new(1.0, 0.0, 0.0);
    let e2 = Vec3::new(0.0, 0.45, 0.89).normalized().expect("unit");
    let theta0 = std::f64::consts::PI * 0.85;
    let theta1 = std::f64::consts::PI * 0.15;
    PathSpec {
        shoulder: Vec3::new(0.0, 10.0, 38.0) + jitter3(rng, 1.0),
        bend_hint: Vec3::new(0.85, -0.3, -0.45),
        wrist_at: Box::new(move |s| {
            let theta = theta0 + (theta1 - theta0) * smoothstep(s);
            center + e1 * (radius * theta.cos()) + e2 * (radius * theta.sin())
        }),
    }
}

fn assembly_path(rng: &mut ChaCha8Rng, variant: u8) -> PathSpec {
    // wide lateral sweeps at moderate arm extension; the elbow leads on the
    // right throughout so the octant schedule stays put while the wrist
    // crosses the midline
    let (pick, align) = match variant {
        1 => (Vec3::new(-4.0, 28.0, 5.0), Vec3::new(6.0, 43.0, 13.0)),
        2 => (Vec3::new(-8.0, 30.0, 6.0), Vec3::new(2.0, 44.0, 12.0)),
        _ => (Vec3::new(-10.0, 29.0, 7.0), Vec3::new(-2.0, 42.0, 14.0)),
    };
    let pick = pick + jitter3(rng, 1.2);
    let align = align + jitter3(rng, 1.2);
    let wobble = rng.random_range(0.6..1.2);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let hint_x = 0.8;
    // two pick-align cycles: the fold depth swings twice per demonstration
    let leg = move |u: f64, from: Vec3, to: Vec3| from + (to - from) * smoothstep(u);
    PathSpec {
        shoulder: Vec3::new(0.0, 10.0, 38.0) + jitter3(rng, 1.0),
        bend_hint: Vec3::new(hint_x, 0.35, -0.45),
        wrist_at: Box::new(move |s| {
            let hover = |u: f64| {
                // envelope keeps the hover continuous with the travel legs
                let amp = wobble * (std::f64::consts::PI * u).sin();
                let swirl = std::f64::consts::TAU * 1.5 * u + phase;
                align + Vec3::new(amp * swirl.cos(), 0.0, amp * swirl.sin())
            };
            if s < 0.2 {
                leg(s / 0.2, pick, align)
            } else if s < 0.4 {
                hover((s - 0.2) / 0.2)
            } else if s < 0.6 {
                leg((s - 0.4) / 0.2, align, pick)
            } else if s < 0.8 {
                leg((s - 0.6) / 0.2, pick, align)
            } else {
                hover((s - 0.8) / 0.2)
            }
        }),
    }
}

/// Deterministic synthetic demonstration for a task.
///
/// Same (kind, n_frames, seed) always produces the identical trajectory.
/// Incision kinds sweep the wrist along a straight line or an arc over the
/// incision pad; assembly kinds move from a pick pose to an alignment hover.
pub fn synth_demo(
    kind: TaskLabel,
    n_frames: usize,
    seed: u64,
) -> Result<SkeletonTrajectory, IngestError> {
    if n_frames < 2 {
        return Err(IngestError::TooFewFrames(n_frames));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = match kind {
        TaskLabel::IncisionStraight => incision_straight_path(&mut rng),
        TaskLabel::IncisionCurve => incision_curve_path(&mut rng),
        TaskLabel::Assembly1 => assembly_path(&mut rng, 1),
        TaskLabel::Assembly2 => assembly_path(&mut rng, 2),
        TaskLabel::Assembly3 => assembly_path(&mut rng, 3),
        TaskLabel::Other => return Err(IngestError::InvalidKind(kind)),
    };

    let dt = 1.0 / 30.0;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let s = i as f64 / (n_frames - 1) as f64;
        let wrist = if kind == TaskLabel::IncisionStraight {
            // keep exact collinearity: no per-point clamping on the line
            (spec.wrist_at)(s)
        } else {
            clamp_reach(spec.shoulder, (spec.wrist_at)(s))
        };
        let elbow = solve_elbow(spec.shoulder, wrist, spec.bend_hint);
        frames.push(ArmFrame {
            t: i as f64 * dt,
            shoulder: spec.shoulder,
            elbow,
            wrist,
        });
    }
    SkeletonTrajectory::new(kind, Arm::Right, Some("cm".into()), frames)
}
