//! The three IK solvers: an unconstrained FABRIK baseline, PIC, and PICs,
//! sharing one backward/forward iteration skeleton.
//!
//! Each iteration first places the end effector at the target and walks
//! toward the base (backward pass), then re-anchors the base and walks back
//! out (forward pass). PIC projects IN-constrained link directions during the
//! backward pass and OUT-constrained directions during the forward pass; PICs
//! does the same against Hamming-softened octant neighborhoods. OUT
//! constraints are enforced last and therefore take precedence; IN
//! satisfaction is best-effort and always reported.

use crate::chain::{ChainError, KinematicChain, RobotDefinition, ASSEMBLY_TOL};
use crate::constraints::{
    admissible_set, project_into_set, ConstraintError, PoseConstraintSet, SofteningFactor,
};
use crate::geom::{angle_between, GeomError, OctantId, Vec3, GEOM_EPS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Squared distance below which two consecutive joints count as coincident
/// during a pass.
const COINCIDENT_EPS_SQ: f64 = 1e-30;

/// Nudge applied along the prior link direction when a pass hits coincident
/// joints.
const DEGENERATE_NUDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("max_iterations must be at least 1")]
    BadMaxIterations,
    #[error("position tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("target is not finite")]
    NonFiniteTarget,
    #[error("chain is not assembled (link length deviation {0})")]
    UnassembledChain(f64),
    #[error("constraint addresses joint {joint} outside the chain ({joints} joints)")]
    ConstraintOutOfBounds { joint: usize, joints: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("expected {targets} constraint sets for {targets} targets, got {constraints}")]
    ConstraintCountMismatch { targets: usize, constraints: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Which solver variant to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Fabrik,
    Pic,
    Pics,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Fabrik => "fabrik",
            SolverMode::Pic => "pic",
            SolverMode::Pics => "pics",
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fabrik" => Ok(SolverMode::Fabrik),
            "pic" => Ok(SolverMode::Pic),
            "pics" => Ok(SolverMode::Pics),
            other => Err(format!("unknown solver mode {other:?}")),
        }
    }
}

/// Solver parameters. Iterations default to 20; tolerance to 1e-3 chain
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: SolverMode,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub position_tolerance: f64,
    /// Softening factor; only consulted in PICs mode.
    #[serde(default = "SofteningFactor::none")]
    pub eta: SofteningFactor,
}

fn default_max_iterations() -> usize {
    20
}

fn default_tolerance() -> f64 {
    1e-3
}

impl SofteningFactor {
    fn none() -> Self {
        SofteningFactor::NONE
    }
}

impl SolverConfig {
    pub fn fabrik() -> Self {
        Self {
            mode: SolverMode::Fabrik,
            max_iterations: default_max_iterations(),
            position_tolerance: default_tolerance(),
            eta: SofteningFactor::NONE,
        }
    }

    pub fn pic() -> Self {
        Self {
            mode: SolverMode::Pic,
            ..Self::fabrik()
        }
    }

    pub fn pics(eta: SofteningFactor) -> Self {
        Self {
            mode: SolverMode::Pics,
            eta,
            ..Self::fabrik()
        }
    }

    /// Softening actually applied: none for FABRIK and PIC, `eta` for PICs.
    pub fn effective_eta(&self) -> SofteningFactor {
        match self.mode {
            SolverMode::Pics => self.eta,
            _ => SofteningFactor::NONE,
        }
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.max_iterations == 0 {
            return Err(SolveError::BadMaxIterations);
        }
        if !(self.position_tolerance.is_finite() && self.position_tolerance > 0.0) {
            return Err(SolveError::BadTolerance(self.position_tolerance));
        }
        Ok(())
    }
}

/// Whether a constraint confines the link leaving a joint (OUT) or the
/// direction back along the incoming link (IN).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Out,
    In,
}

/// Post-solve satisfaction record for one octant constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintStatus {
    /// 0-based joint the constraint addresses (1-based in serialized form,
    /// adjusted by the wire layer of the callers that need it).
    pub joint: usize,
    pub kind: ConstraintKind,
    pub octant: OctantId,
    /// Softening level the check was made against.
    pub eta: SofteningFactor,
    /// Direction lies in the strict constraint octant closure (tolerance 1e-9).
    pub in_octant: bool,
    /// Direction lies in the softened admissible region (tolerance 1e-9).
    pub satisfied: bool,
    /// Angular deviation in radians from the admissible region; zero when
    /// satisfied.
    pub deviation: f64,
}

/// Result of one solve: the final chain plus convergence and constraint
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub chain: KinematicChain,
    pub iterations_used: usize,
    /// Distance between the end effector and the target.
    pub residual: f64,
    /// True iff `residual <= position_tolerance`.
    pub converged: bool,
    /// One entry per constraint when constraints were supplied, in
    /// (pair, OUT-then-IN) order. Empty otherwise.
    pub constraint_report: Vec<ConstraintStatus>,
}

fn check_constraint_bounds(
    constraints: &PoseConstraintSet,
    joint_count: usize,
) -> Result<(), SolveError> {
    let max = constraints.max_joint();
    if max >= joint_count {
        return Err(SolveError::ConstraintOutOfBounds {
            joint: max,
            joints: joint_count,
        });
    }
    Ok(())
}

/// Link direction used when consecutive joints coincide: continue along the
/// link's direction from before the pass.
fn fallback_delta(prev_dir: Vec3) -> Vec3 {
    prev_dir * DEGENERATE_NUDGE
}

/// One backward pass: pin the end effector to the target and walk joint
/// positions toward the base, projecting IN-constrained directions. The base
/// is left displaced.
pub fn backward_pass(
    chain: &mut KinematicChain,
    target: Vec3,
    constraints: Option<&PoseConstraintSet>,
    eta: SofteningFactor,
) -> Result<(), SolveError> {
    if !target.is_finite() {
        return Err(SolveError::NonFiniteTarget);
    }
    if let Some(c) = constraints {
        check_constraint_bounds(c, chain.joint_count())?;
    }
    let n = chain.joint_count();
    let prev_dirs = chain.directions()?;
    let lengths = chain.link_lengths().to_vec();
    let joints = chain.joints_mut();
    joints[n - 1] = target;
    for i in (1..n).rev() {
        let mut delta = joints[i - 1] - joints[i];
        if delta.norm_squared() < COINCIDENT_EPS_SQ {
            delta = fallback_delta(-prev_dirs[i - 1]);
        }
        let dir = match constraints.and_then(|c| c.in_octant_at(i)) {
            Some(octant) => project_into_set(delta, admissible_set(octant, eta))?,
            None => delta.normalized()?,
        };
        joints[i - 1] = joints[i] + dir * lengths[i - 1];
    }
    Ok(())
}

/// One forward pass: re-anchor the base and walk joint positions out to the
/// end effector, projecting OUT-constrained directions.
pub fn forward_pass(
    chain: &mut KinematicChain,
    base: Vec3,
    constraints: Option<&PoseConstraintSet>,
    eta: SofteningFactor,
) -> Result<(), SolveError> {
    if !base.is_finite() {
        return Err(SolveError::NonFiniteTarget);
    }
    if let Some(c) = constraints {
        check_constraint_bounds(c, chain.joint_count())?;
    }
    let n = chain.joint_count();
    let prev_dirs = chain.directions()?;
    let lengths = chain.link_lengths().to_vec();
    let joints = chain.joints_mut();
    joints[0] = base;
    for i in 0..n - 1 {
        let mut delta = joints[i + 1] - joints[i];
        if delta.norm_squared() < COINCIDENT_EPS_SQ {
            delta = fallback_delta(prev_dirs[i]);
        }
        let dir = match constraints.and_then(|c| c.out_octant_at(i)) {
            Some(octant) => project_into_set(delta, admissible_set(octant, eta))?,
            None => delta.normalized()?,
        };
        joints[i + 1] = joints[i] + dir * lengths[i];
    }
    Ok(())
}

fn constraint_direction(chain: &KinematicChain, joint: usize, kind: ConstraintKind) -> Vec3 {
    let joints = chain.joints();
    match kind {
        ConstraintKind::Out => joints[joint + 1] - joints[joint],
        ConstraintKind::In => joints[joint - 1] - joints[joint],
    }
}

fn status_for(
    chain: &KinematicChain,
    joint: usize,
    kind: ConstraintKind,
    octant: OctantId,
    eta: SofteningFactor,
) -> Result<ConstraintStatus, SolveError> {
    let dir = constraint_direction(chain, joint, kind);
    let region = admissible_set(octant, eta);
    let in_octant = octant.closure_contains(dir, GEOM_EPS);
    let satisfied = region.iter().any(|o| o.closure_contains(dir, GEOM_EPS));
    let deviation = if satisfied {
        0.0
    } else {
        angle_between(dir, project_into_set(dir, region)?)?
    };
    Ok(ConstraintStatus {
        joint,
        kind,
        octant,
        eta,
        in_octant,
        satisfied,
        deviation,
    })
}

/// Evaluate every constraint against the final chain. Never silent: each of
/// the four constraints gets an entry whether satisfied or not.
pub fn constraint_report(
    chain: &KinematicChain,
    constraints: &PoseConstraintSet,
    eta: SofteningFactor,
) -> Result<Vec<ConstraintStatus>, SolveError> {
    check_constraint_bounds(constraints, chain.joint_count())?;
    let mut report = Vec::with_capacity(4);
    for pair in constraints.pairs() {
        report.push(status_for(
            chain,
            pair.out_joint(),
            ConstraintKind::Out,
            pair.out_octant(),
            eta,
        )?);
        report.push(status_for(
            chain,
            pair.in_joint(),
            ConstraintKind::In,
            pair.in_octant(),
            eta,
        )?);
    }
    Ok(report)
}

/// Iterate backward/forward passes until the end effector reaches the target
/// or the iteration budget runs out.
///
/// Unreachable targets run the same loop and come back `converged = false`
/// with the chain stretched toward the target. In FABRIK mode constraints are
/// not enforced, but when supplied they are still evaluated into the report.
pub fn solve(
    chain: &KinematicChain,
    target: Vec3,
    constraints: Option<&PoseConstraintSet>,
    cfg: &SolverConfig,
) -> Result<Solution, SolveError> {
    cfg.validate()?;
    if !target.is_finite() {
        return Err(SolveError::NonFiniteTarget);
    }
    let deviation = chain.link_length_deviation();
    if deviation > ASSEMBLY_TOL {
        return Err(SolveError::UnassembledChain(deviation));
    }
    if let Some(c) = constraints {
        check_constraint_bounds(c, chain.joint_count())?;
    }

    let enforced = match cfg.mode {
        SolverMode::Fabrik => None,
        _ => constraints,
    };
    let eta = cfg.effective_eta();
    let base = chain.base();
    let mut work = chain.clone();
    let mut residual = work.end_effector().distance(target);
    let mut iterations_used = 0;
    while residual > cfg.position_tolerance && iterations_used < cfg.max_iterations {
        backward_pass(&mut work, target, enforced, eta)?;
        forward_pass(&mut work, base, enforced, eta)?;
        iterations_used += 1;
        residual = work.end_effector().distance(target);
    }
    let converged = residual <= cfg.position_tolerance;
    let constraint_report = match constraints {
        Some(c) => constraint_report(&work, c, eta)?,
        None => Vec::new(),
    };
    Ok(Solution {
        chain: work,
        iterations_used,
        residual,
        converged,
        constraint_report,
    })
}

/// Solve a whole trajectory, warm-starting every frame from the previous
/// frame's chain. The first frame starts from the robot's rest configuration.
pub fn solve_trajectory(
    def: &RobotDefinition,
    targets: &[Vec3],
    constraints: Option<&[PoseConstraintSet]>,
    cfg: &SolverConfig,
) -> Result<Vec<Solution>, SolveError> {
    if targets.is_empty() {
        return Err(SolveError::EmptyTrajectory);
    }
    if let Some(c) = constraints {
        if c.len() != targets.len() {
            return Err(SolveError::ConstraintCountMismatch {
                targets: targets.len(),
                constraints: c.len(),
            });
        }
    }
    let mut chain = def.rest_chain()?;
    let mut solutions = Vec::with_capacity(targets.len());
    for (i, &target) in targets.iter().enumerate() {
        let frame_constraints = constraints.map(|c| &c[i]);
        let solution = solve(&chain, target, frame_constraints, cfg)?;
        chain = solution.chain.clone();
        solutions.push(solution);
    }
    Ok(solutions)
}
