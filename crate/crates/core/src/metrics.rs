//! Imitation quality metrics: pose accuracy from joint-angle series, and the
//! percentage of occlusion/obstruction of a region of interest.
//!
//! Occlusion projects every chain link orthographically onto the ROI plane
//! and integrates the area under each projected link's 2D line, clamped to
//! the ROI height and clipped to its width, normalized by the ROI area.
//! Per-link areas are summed without union, so overlapping links double
//! count and PO may exceed 1.

use crate::chain::KinematicChain;
use crate::geom::{angle_between, GeomError, Vec3};
use crate::solver::Solution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default pose-accuracy threshold: (10 degrees)^2 in radians^2.
pub const DEFAULT_DELTA: f64 = 0.030461741978670857;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("angle series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty angle series")]
    EmptySeries,
    #[error("pose angle {0} outside [0, pi]")]
    AngleOutOfRange(f64),
    #[error("threshold delta must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("ROI axes must be orthonormal within 1e-9 (|u|={u_norm}, |n|={n_norm}, u.n={dot})")]
    BadRoiAxes { u_norm: f64, n_norm: f64, dot: f64 },
    #[error("ROI extent must be positive and finite (w={width}, h={height})")]
    BadRoiExtent { width: f64, height: f64 },
    #[error("no frames over ROI")]
    NoFramesOverRoi,
    #[error("per-frame inputs have different lengths ({0} vs {1})")]
    FrameCountMismatch(usize, usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Which body produced an angle series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSource {
    Human,
    Robot,
}

/// Per-frame pose angles in radians, each in [0, pi].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseAngleSeries {
    source: AngleSource,
    values: Vec<f64>,
}

impl PoseAngleSeries {
    pub fn new(source: AngleSource, values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        for &v in &values {
            if !(v.is_finite() && (0.0..=std::f64::consts::PI).contains(&v)) {
                return Err(MetricsError::AngleOutOfRange(v));
            }
        }
        Ok(Self { source, values })
    }

    pub fn source(&self) -> AngleSource {
        self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Angle between the upper-arm link and the forearm link of a skeleton frame.
/// Zero for a straight arm, pi for a fully folded one.
pub fn pose_angle(shoulder: Vec3, elbow: Vec3, wrist: Vec3) -> Result<f64, MetricsError> {
    Ok(angle_between(elbow - shoulder, wrist - elbow)?)
}

/// Pose angle of a chain measured at its marked joints
/// (0-based shoulder, elbow, wrist indices).
pub fn chain_pose_angle(
    chain: &KinematicChain,
    marked: (usize, usize, usize),
) -> Result<f64, MetricsError> {
    let joints = chain.joints();
    pose_angle(joints[marked.0], joints[marked.1], joints[marked.2])
}

/// Fraction of frames whose squared pose-angle error is below `delta`.
pub fn pose_accuracy(
    human: &PoseAngleSeries,
    robot: &PoseAngleSeries,
    delta: f64,
) -> Result<f64, MetricsError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(MetricsError::BadDelta(delta));
    }
    if human.len() != robot.len() {
        return Err(MetricsError::LengthMismatch(human.len(), robot.len()));
    }
    let hits = human
        .values
        .iter()
        .zip(&robot.values)
        .filter(|(h, r)| (*h - *r).powi(2) < delta)
        .count();
    Ok(hits as f64 / human.len() as f64)
}

/// Rectangular region of interest on a task plane.
///
/// In-plane coordinates: `u` is the x-axis, `v = normal x u` the height axis.
/// The rectangle spans `[0, width] x [0, height]` from the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Roi {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    normal: Vec3,
    width: f64,
    height: f64,
}

impl Roi {
    pub fn new(
        origin: Vec3,
        u_axis: Vec3,
        normal: Vec3,
        width: f64,
        height: f64,
    ) -> Result<Self, MetricsError> {
        let u_norm = u_axis.norm();
        let n_norm = normal.norm();
        let dot = u_axis.dot(normal);
        if (u_norm - 1.0).abs() > 1e-9 || (n_norm - 1.0).abs() > 1e-9 || dot.abs() > 1e-9 {
            return Err(MetricsError::BadRoiAxes { u_norm, n_norm, dot });
        }
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(MetricsError::BadRoiExtent { width, height });
        }
        Ok(Self {
            origin,
            u: u_axis,
            v: normal.cross(u_axis),
            normal,
            width,
            height,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn u_axis(&self) -> Vec3 {
        self.u
    }

    pub fn v_axis(&self) -> Vec3 {
        self.v
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Orthographic projection along the plane normal, in ROI coordinates.
    pub fn project_point(&self, p: Vec3) -> (f64, f64) {
        let q = p - self.origin;
        (q.dot(self.u), q.dot(self.v))
    }

    /// True when the projection of `p` falls inside the closed rectangle.
    pub fn covers(&self, p: Vec3) -> bool {
        let (x, y) = self.project_point(p);
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

impl<'de> Deserialize<'de> for Roi {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            origin: Vec3,
            u: Vec3,
            normal: Vec3,
            width: f64,
            height: f64,
        }
        let w = Wire::deserialize(deserializer)?;
        Roi::new(w.origin, w.u, w.normal, w.width, w.height).map_err(serde::de::Error::custom)
    }
}

/// A projected link in ROI plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment2 {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Segment2 {
    pub fn new(p1: (f64, f64), p2: (f64, f64)) -> Self {
        Self {
            x1: p1.0,
            y1: p1.1,
            x2: p2.0,
            y2: p2.1,
        }
    }
}

/// Project a 3D link segment onto the ROI plane.
pub fn project_link(p1: Vec3, p2: Vec3, roi: &Roi) -> Segment2 {
    Segment2::new(roi.project_point(p1), roi.project_point(p2))
}

/// Area under one projected link's 2D line, clamped to [0, h] vertically and
/// clipped to [0, w] horizontally. Closed form, split at the clamp crossings.
fn clamped_link_area(seg: Segment2, width: f64, height: f64) -> f64 {
    let (xa, ya, xb, yb) = if seg.x1 <= seg.x2 {
        (seg.x1, seg.y1, seg.x2, seg.y2)
    } else {
        (seg.x2, seg.y2, seg.x1, seg.y1)
    };
    if xa == xb {
        // vertical projection contributes no width
        return 0.0;
    }
    let lo = xa.max(0.0);
    let hi = xb.min(width);
    if lo >= hi {
        return 0.0;
    }
    let slope = (yb - ya) / (xb - xa);
    let intercept = ya - slope * xa;

    let mut cuts = vec![lo, hi];
    if slope != 0.0 {
        for level in [0.0, height] {
            let x = (level - intercept) / slope;
            if x > lo && x < hi {
                cuts.push(x);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut points"));

    let mut area = 0.0;
    for pair in cuts.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        if x1 <= x0 {
            continue;
        }
        let mid = 0.5 * (x0 + x1);
        let f_mid = slope * mid + intercept;
        if f_mid <= 0.0 {
            continue;
        }
        if f_mid >= height {
            area += height * (x1 - x0);
        } else {
            area += 0.5 * slope * (x1 * x1 - x0 * x0) + intercept * (x1 - x0);
        }
    }
    area
}

/// Percentage of occlusion: summed clamped areas under the projected links,
/// normalized by the ROI area. An empty link list scores 0.
pub fn occlusion_percentage(segments: &[Segment2], roi: &Roi) -> f64 {
    let total: f64 = segments
        .iter()
        .map(|s| clamped_link_area(*s, roi.width, roi.height))
        .sum();
    total / roi.area()
}

/// Occlusion of one frame given the 3D link endpoints of a chain.
pub fn frame_occlusion(links: &[(Vec3, Vec3)], roi: &Roi) -> f64 {
    let segments: Vec<Segment2> = links
        .iter()
        .map(|(a, b)| project_link(*a, *b, roi))
        .collect();
    occlusion_percentage(&segments, roi)
}

/// Frame mask: true where the wrist projects inside the closed ROI rectangle.
pub fn gate_frames(wrists: &[Vec3], roi: &Roi) -> Vec<bool> {
    wrists.iter().map(|w| roi.covers(*w)).collect()
}

/// Mean occlusion over gated frames for arbitrary per-frame link lists.
pub fn task_po_links(
    per_frame_links: &[Vec<(Vec3, Vec3)>],
    wrists: &[Vec3],
    roi: &Roi,
) -> Result<f64, MetricsError> {
    if per_frame_links.len() != wrists.len() {
        return Err(MetricsError::FrameCountMismatch(
            per_frame_links.len(),
            wrists.len(),
        ));
    }
    let gate = gate_frames(wrists, roi);
    let mut total = 0.0;
    let mut count = 0usize;
    for (links, gated) in per_frame_links.iter().zip(&gate) {
        if *gated {
            total += frame_occlusion(links, roi);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::NoFramesOverRoi);
    }
    Ok(total / count as f64)
}

/// Mean occlusion of the solved robot chains over gated frames.
pub fn task_po(
    solutions: &[Solution],
    wrists: &[Vec3],
    roi: &Roi,
) -> Result<f64, MetricsError> {
    let per_frame: Vec<Vec<(Vec3, Vec3)>> = solutions
        .iter()
        .map(|s| s.chain.links().collect())
        .collect();
    task_po_links(&per_frame, wrists, roi)
}

/// Per-frame metric breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub human_angle: f64,
    pub robot_angle: f64,
    pub squared_error: f64,
    pub accurate: bool,
    pub gated: bool,
    pub occlusion: f64,
}

/// Aggregate metric report for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pacc: f64,
    pub po: f64,
    pub frames_evaluated: usize,
    pub frames_gated: usize,
    pub per_frame: Vec<FrameScore>,
}

impl MetricsReport {
    /// Score a trajectory: angle agreement per frame plus gated occlusion.
    pub fn compute(
        human: &PoseAngleSeries,
        robot: &PoseAngleSeries,
        delta: f64,
        per_frame_links: &[Vec<(Vec3, Vec3)>],
        wrists: &[Vec3],
        roi: &Roi,
    ) -> Result<Self, MetricsError> {
        if human.len() != robot.len() {
            return Err(MetricsError::LengthMismatch(human.len(), robot.len()));
        }
        if per_frame_links.len() != human.len() || wrists.len() != human.len() {
            return Err(MetricsError::FrameCountMismatch(
                per_frame_links.len(),
                wrists.len(),
            ));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(MetricsError::BadDelta(delta));
        }
        let gate = gate_frames(wrists, roi);
        let mut per_frame = Vec::with_capacity(human.len());
        for i in 0..human.len() {
            let h = human.values()[i];
            let r = robot.values()[i];
            let squared_error = (h - r).powi(2);
            per_frame.push(FrameScore {
                human_angle: h,
                robot_angle: r,
                squared_error,
                accurate: squared_error < delta,
                gated: gate[i],
                occlusion: frame_occlusion(&per_frame_links[i], roi),
            });
        }
        let pacc = per_frame.iter().filter(|f| f.accurate).count() as f64 / per_frame.len() as f64;
        let gated: Vec<&FrameScore> = per_frame.iter().filter(|f| f.gated).collect();
        if gated.is_empty() {
            return Err(MetricsError::NoFramesOverRoi);
        }
        let po = gated.iter().map(|f| f.occlusion).sum::<f64>() / gated.len() as f64;
        Ok(Self {
            pacc,
            po,
            frames_evaluated: per_frame.len(),
            frames_gated: gated.len(),
            per_frame,
        })
    }

    /// Fixed CSV header matching [`MetricsReport::csv_row`].
    pub fn csv_header() -> &'static str {
        "task,robot,method,eta,pacc,po,frames"
    }

    /// One labelled CSV row.
    pub fn csv_row(&self, task: &str, robot: &str, method: &str, eta: u8) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            task, robot, method, eta, self.pacc, self.po, self.frames_evaluated
        )
    }
}
