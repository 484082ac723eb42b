//! Pose-imitation inverse kinematics.
//!
//! An octant-based constraint model captures a human arm pose as two
//! (OUT, IN) octant pairs around the shoulder, elbow and wrist, maps them
//! onto arbitrary serial chains, and solves with FABRIK-style iteration:
//! the FABRIK baseline ignores the constraints, PIC enforces them, and PICs
//! softens each octant to its Hamming neighborhood. The crate also carries
//! the toolkit around the solvers: demonstration ingestion and retargeting,
//! pose-accuracy and occlusion metrics, and a deterministic experiment
//! harness.

pub mod chain;
pub mod constraints;
pub mod experiment;
pub mod geom;
pub mod ingest;
pub mod metrics;
pub mod solver;

pub use chain::{KinematicChain, MarkedJoints, RobotDefinition};
pub use constraints::{ConstraintPair, PoseConstraintSet, SofteningFactor};
pub use geom::{OctantId, OctantSet, Vec3};
pub use ingest::{SkeletonTrajectory, TaskLabel, WorkspaceTransform};
pub use metrics::{MetricsReport, PoseAngleSeries, Roi};
pub use solver::{Solution, SolverConfig, SolverMode};
