//! Kinematic chain representation, forward placement, and reachability
//! queries shared by all solvers.
//!
//! Chains store joint positions directly (no joint angles); every solver
//! operates on positions and preserves the fixed link lengths.

use crate::geom::{GeomError, Vec3};
use crate::ingest::WorkspaceTransform;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Link lengths must match joint spacing within this tolerance for a chain to
/// count as assembled.
pub const ASSEMBLY_TOL: f64 = 1e-6;

/// Errors from chain construction and robot definition files.
#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain needs at least 3 joints, got {0}")]
    TooFewJoints(usize),
    #[error("link length {index} must be positive and finite, got {value}")]
    BadLinkLength { index: usize, value: f64 },
    #[error("expected {expected} directions for {links} links, got {actual}")]
    DirectionCountMismatch {
        expected: usize,
        links: usize,
        actual: usize,
    },
    #[error("direction {index} is not unit length (|d| = {norm})")]
    NonUnitDirection { index: usize, norm: f64 },
    #[error("joint positions do not match link lengths (max deviation {deviation})")]
    NotAssembled { deviation: f64 },
    #[error("non-finite joint position at index {0}")]
    NonFiniteJoint(usize),
    #[error(
        "constrained joints must satisfy 1 <= shoulder < elbow < wrist <= {joints}, \
         got ({shoulder}, {elbow}, {wrist})"
    )]
    BadMarkedJoints {
        shoulder: usize,
        elbow: usize,
        wrist: usize,
        joints: usize,
    },
    #[error("rest_directions must have one entry per link ({links}), got {actual}")]
    RestDirectionCount { links: usize, actual: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Transform(#[from] crate::ingest::IngestError),
}

/// Serial kinematic chain: ordered joint positions with fixed link lengths.
///
/// `joints[0]` is the base. An assembled chain keeps
/// `|joints[i+1] - joints[i]| = link_lengths[i]` within [`ASSEMBLY_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicChain {
    name: String,
    joints: Vec<Vec3>,
    link_lengths: Vec<f64>,
}

impl KinematicChain {
    /// Build a chain from explicit joint positions, validating assembly.
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Vec3>,
        link_lengths: Vec<f64>,
    ) -> Result<Self, ChainError> {
        if joints.len() < 3 {
            return Err(ChainError::TooFewJoints(joints.len()));
        }
        if link_lengths.len() != joints.len() - 1 {
            return Err(ChainError::DirectionCountMismatch {
                expected: joints.len() - 1,
                links: link_lengths.len(),
                actual: link_lengths.len(),
            });
        }
        for (i, &len) in link_lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(ChainError::BadLinkLength { index: i, value: len });
            }
        }
        for (i, j) in joints.iter().enumerate() {
            if !j.is_finite() {
                return Err(ChainError::NonFiniteJoint(i));
            }
        }
        let chain = Self {
            name: name.into(),
            joints,
            link_lengths,
        };
        let deviation = chain.link_length_deviation();
        if deviation > ASSEMBLY_TOL {
            return Err(ChainError::NotAssembled { deviation });
        }
        Ok(chain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[Vec3] {
        &self.joints
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn link_count(&self) -> usize {
        self.link_lengths.len()
    }

    /// Root position (first joint).
    pub fn base(&self) -> Vec3 {
        self.joints[0]
    }

    /// Last joint position.
    pub fn end_effector(&self) -> Vec3 {
        *self.joints.last().expect("chain has joints")
    }

    /// Sum of link lengths (the chain cannot reach farther from its base).
    pub fn max_reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Unit direction of every link, base to tip.
    pub fn directions(&self) -> Result<Vec<Vec3>, GeomError> {
        self.joints
            .windows(2)
            .map(|w| (w[1] - w[0]).normalized())
            .collect()
    }

    /// Largest deviation between joint spacing and the fixed link lengths.
    pub fn link_length_deviation(&self) -> f64 {
        self.joints
            .windows(2)
            .zip(&self.link_lengths)
            .map(|(w, &len)| ((w[1] - w[0]).norm() - len).abs())
            .fold(0.0, f64::max)
    }

    /// Consecutive joint pairs, one per link.
    pub fn links(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.joints.windows(2).map(|w| (w[0], w[1]))
    }

    pub(crate) fn joints_mut(&mut self) -> &mut [Vec3] {
        &mut self.joints
    }
}

impl<'de> Deserialize<'de> for KinematicChain {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Wire {
            name: String,
            joints: Vec<Vec3>,
            link_lengths: Vec<f64>,
        }
        let w = Wire::deserialize(deserializer)?;
        KinematicChain::new(w.name, w.joints, w.link_lengths).map_err(serde::de::Error::custom)
    }
}

/// Indices of the robot joints playing the human shoulder, elbow and wrist.
/// Stored 0-based; the file format is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkedJoints {
    shoulder: usize,
    elbow: usize,
    wrist: usize,
}

impl MarkedJoints {
    /// Build from 1-based indices as they appear in definition files.
    pub fn from_one_based(
        shoulder: usize,
        elbow: usize,
        wrist: usize,
        joint_count: usize,
    ) -> Result<Self, ChainError> {
        if shoulder >= 1 && shoulder < elbow && elbow < wrist && wrist <= joint_count {
            Ok(Self {
                shoulder: shoulder - 1,
                elbow: elbow - 1,
                wrist: wrist - 1,
            })
        } else {
            Err(ChainError::BadMarkedJoints {
                shoulder,
                elbow,
                wrist,
                joints: joint_count,
            })
        }
    }

    /// 0-based shoulder joint index.
    pub fn shoulder(self) -> usize {
        self.shoulder
    }

    /// 0-based elbow joint index.
    pub fn elbow(self) -> usize {
        self.elbow
    }

    /// 0-based wrist joint index.
    pub fn wrist(self) -> usize {
        self.wrist
    }

    /// (shoulder, elbow, wrist) as 1-based indices for serialization.
    pub fn one_based(self) -> (usize, usize, usize) {
        (self.shoulder + 1, self.elbow + 1, self.wrist + 1)
    }
}

/// A robot chain template plus the three joints the human arm maps onto.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotDefinition {
    pub name: String,
    pub base: Vec3,
    pub link_lengths: Vec<f64>,
    pub marked: MarkedJoints,
    /// Unit rest direction per link; defaults to +z for every link.
    pub rest_directions: Option<Vec<Vec3>>,
    /// Default human-to-robot workspace transform for this robot.
    pub transform: Option<WorkspaceTransform>,
}

impl RobotDefinition {
    /// Number of joints in the chain this definition assembles.
    pub fn joint_count(&self) -> usize {
        self.link_lengths.len() + 1
    }

    pub fn max_reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Place the chain joints from the base along the given unit directions.
    pub fn assemble(&self, directions: &[Vec3]) -> Result<KinematicChain, ChainError> {
        let links = self.link_lengths.len();
        if directions.len() != links {
            return Err(ChainError::DirectionCountMismatch {
                expected: links,
                links,
                actual: directions.len(),
            });
        }
        for (i, d) in directions.iter().enumerate() {
            let norm = d.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > ASSEMBLY_TOL {
                return Err(ChainError::NonUnitDirection { index: i, norm });
            }
        }
        let mut joints = Vec::with_capacity(links + 1);
        joints.push(self.base);
        let mut pos = self.base;
        for (d, &len) in directions.iter().zip(&self.link_lengths) {
            pos += *d * len;
            joints.push(pos);
        }
        KinematicChain::new(self.name.clone(), joints, self.link_lengths.clone())
    }

    /// Rest configuration: the definition's rest directions, or +z throughout.
    pub fn rest_chain(&self) -> Result<KinematicChain, ChainError> {
        match &self.rest_directions {
            Some(dirs) => self.assemble(dirs),
            None => {
                let up = Vec3::new(0.0, 0.0, 1.0);
                self.assemble(&vec![up; self.link_lengths.len()])
            }
        }
    }

    fn validate(self) -> Result<Self, ChainError> {
        if self.joint_count() < 3 {
            return Err(ChainError::TooFewJoints(self.joint_count()));
        }
        for (i, &len) in self.link_lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(ChainError::BadLinkLength { index: i, value: len });
            }
        }
        if let Some(dirs) = &self.rest_directions {
            if dirs.len() != self.link_lengths.len() {
                return Err(ChainError::RestDirectionCount {
                    links: self.link_lengths.len(),
                    actual: dirs.len(),
                });
            }
            for (i, d) in dirs.iter().enumerate() {
                let norm = d.norm();
                if !norm.is_finite() || (norm - 1.0).abs() > ASSEMBLY_TOL {
                    return Err(ChainError::NonUnitDirection { index: i, norm });
                }
            }
        }
        Ok(self)
    }

    /// Load a robot definition file (JSON, 1-based joint indices).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ChainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|err| match err {
            ChainError::Parse { source, .. } => ChainError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    /// Parse a robot definition from its JSON text.
    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        let wire: RobotDefinitionWire =
            serde_json::from_str(text).map_err(|source| ChainError::Parse {
                path: "<robot definition>".into(),
                source,
            })?;
        wire.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RobotDefinitionWire::from(self))
            .expect("robot definition serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct ConstrainedJointsWire {
    shoulder: usize,
    elbow: usize,
    wrist: usize,
}

#[derive(Serialize, Deserialize)]
struct RobotDefinitionWire {
    name: String,
    base: Vec3,
    link_lengths: Vec<f64>,
    constrained_joints: ConstrainedJointsWire,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rest_directions: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<WorkspaceTransform>,
}

impl TryFrom<RobotDefinitionWire> for RobotDefinition {
    type Error = ChainError;

    fn try_from(w: RobotDefinitionWire) -> Result<Self, ChainError> {
        let joint_count = w.link_lengths.len() + 1;
        let marked = MarkedJoints::from_one_based(
            w.constrained_joints.shoulder,
            w.constrained_joints.elbow,
            w.constrained_joints.wrist,
            joint_count,
        )?;
        RobotDefinition {
            name: w.name,
            base: w.base,
            link_lengths: w.link_lengths,
            marked,
            rest_directions: w.rest_directions,
            transform: w.transform,
        }
        .validate()
    }
}

impl From<&RobotDefinition> for RobotDefinitionWire {
    fn from(def: &RobotDefinition) -> Self {
        let (shoulder, elbow, wrist) = def.marked.one_based();
        RobotDefinitionWire {
            name: def.name.clone(),
            base: def.base,
            link_lengths: def.link_lengths.clone(),
            constrained_joints: ConstrainedJointsWire {
                shoulder,
                elbow,
                wrist,
            },
            rest_directions: def.rest_directions.clone(),
            transform: def.transform.clone(),
        }
    }
}

impl Serialize for RobotDefinition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RobotDefinitionWire::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RobotDefinition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = RobotDefinitionWire::deserialize(deserializer)?;
        wire.try_into().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_link_def() -> RobotDefinition {
        RobotDefinition {
            name: "test".into(),
            base: Vec3::ZERO,
            link_lengths: vec![1.0, 1.0],
            marked: MarkedJoints::from_one_based(1, 2, 3, 3).unwrap(),
            rest_directions: None,
            transform: None,
        }
    }

    #[test]
    fn assemble_places_joints_along_directions() {
        let def = two_link_def();
        let x = Vec3::new(1.0, 0.0, 0.0);
        let chain = def.assemble(&[x, x]).unwrap();
        assert_eq!(
            chain.joints(),
            &[Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)]
        );
        assert_eq!(chain.end_effector(), Vec3::new(2.0, 0.0, 0.0));
        assert!(chain.link_length_deviation() <= ASSEMBLY_TOL);
    }

    #[test]
    fn assemble_from_offset_base() {
        let def = RobotDefinition {
            base: Vec3::new(1.0, 1.0, 1.0),
            ..two_link_def()
        };
        let chain = def
            .assemble(&[Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)])
            .unwrap();
        assert_eq!(
            chain.joints(),
            &[
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(1.0, 2.0, 1.0),
                Vec3::new(1.0, 2.0, 2.0)
            ]
        );
    }

    #[test]
    fn assemble_rejects_bad_input() {
        let def = two_link_def();
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            def.assemble(&[x]),
            Err(ChainError::DirectionCountMismatch { .. })
        ));
        assert!(matches!(
            def.assemble(&[x, Vec3::new(1.0, 1.0, 0.0)]),
            Err(ChainError::NonUnitDirection { index: 1, .. })
        ));
    }

    #[test]
    fn max_reach_is_length_sum() {
        let def = RobotDefinition {
            link_lengths: vec![0.5, 0.25, 0.25],
            marked: MarkedJoints::from_one_based(1, 2, 4, 4).unwrap(),
            ..two_link_def()
        };
        let chain = def.rest_chain().unwrap();
        assert_eq!(chain.max_reach(), 1.0);
    }

    #[test]
    fn directions_round_trip_through_assemble() {
        let def = RobotDefinition {
            link_lengths: vec![1.5, 0.75, 2.0],
            marked: MarkedJoints::from_one_based(1, 2, 4, 4).unwrap(),
            ..two_link_def()
        };
        let dirs = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0).normalized().unwrap(),
            Vec3::new(1.0, 1.0, 1.0).normalized().unwrap(),
        ];
        let chain = def.assemble(&dirs).unwrap();
        let extracted = chain.directions().unwrap();
        for (a, b) in dirs.iter().zip(&extracted) {
            assert!(a.distance(*b) < 1e-9);
        }
        let rebuilt = def.assemble(&extracted).unwrap();
        for (a, b) in chain.joints().iter().zip(rebuilt.joints()) {
            assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn chain_requires_three_joints_and_positive_lengths() {
        assert!(matches!(
            KinematicChain::new("t", vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)], vec![1.0]),
            Err(ChainError::TooFewJoints(2))
        ));
        assert!(matches!(
            KinematicChain::new(
                "t",
                vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
                vec![1.0, 0.0]
            ),
            Err(ChainError::BadLinkLength { index: 1, .. })
        ));
        assert!(matches!(
            KinematicChain::new(
                "t",
                vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
                vec![1.0, 1.5]
            ),
            Err(ChainError::NotAssembled { .. })
        ));
    }

    #[test]
    fn definition_json_round_trip() {
        let text = r#"{
            "name": "demo",
            "base": [0.0, 0.0, 0.0],
            "link_lengths": [10.0, 12.0, 8.0, 6.0],
            "constrained_joints": {"shoulder": 2, "elbow": 3, "wrist": 5}
        }"#;
        let def = RobotDefinition::from_json(text).unwrap();
        assert_eq!(def.joint_count(), 5);
        assert_eq!(def.marked.shoulder(), 1);
        assert_eq!(def.marked.wrist(), 4);
        let round = RobotDefinition::from_json(&def.to_json()).unwrap();
        assert_eq!(round, def);
    }

    #[test]
    fn definition_rejects_bad_marked_joints() {
        let text = r#"{
            "name": "demo",
            "base": [0, 0, 0],
            "link_lengths": [1.0, 1.0],
            "constrained_joints": {"shoulder": 2, "elbow": 2, "wrist": 3}
        }"#;
        assert!(RobotDefinition::from_json(text).is_err());
        let text = r#"{
            "name": "demo",
            "base": [0, 0, 0],
            "link_lengths": [1.0, 1.0],
            "constrained_joints": {"shoulder": 1, "elbow": 2, "wrist": 4}
        }"#;
        assert!(RobotDefinition::from_json(text).is_err());
    }
}
