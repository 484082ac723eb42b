//! The pose constraint model: octant constraints extracted from a human
//! skeleton frame, their mapping onto a robot chain, and softening
//! neighborhoods.
//!
//! A pose is captured by two (OUT, IN) octant pairs. The OUT octant at a
//! joint confines the link leaving that joint; the IN octant at the next
//! marked joint confines the direction looking back along the incoming link.
//! All octant frames are aligned with the world axes and only translate with
//! their joints.

use crate::chain::RobotDefinition;
use crate::geom::{
    angle_between, octant_index, project_into_octant, GeomError, OctantId, OctantSet, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two joints closer than this are a degenerate skeleton frame.
pub const COINCIDENT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("degenerate skeleton frame: joints closer than {COINCIDENT_TOL}")]
    DegenerateSkeletonFrame,
    #[error("IN joint {in_joint} must come after OUT joint {out_joint}")]
    PairOrder { out_joint: usize, in_joint: usize },
    #[error("constraint pairs must share the middle joint ({0} != {1})")]
    UnsharedElbow(usize, usize),
    #[error("softening factor {0} out of range 0..=3")]
    SofteningOutOfRange(u8),
    #[error("constraint addresses joint {joint} but the chain has {joints} joints")]
    JointOutOfBounds { joint: usize, joints: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Softening factor: the Hamming radius added around each constraint octant.
/// Zero means no softening; three admits all 8 octants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SofteningFactor(u8);

impl SofteningFactor {
    /// No softening (the PIC setting).
    pub const NONE: Self = Self(0);

    /// Full softening: every octant is admissible.
    pub const FULL: Self = Self(3);

    pub fn new(eta: u8) -> Result<Self, ConstraintError> {
        if eta <= 3 {
            Ok(Self(eta))
        } else {
            Err(ConstraintError::SofteningOutOfRange(eta))
        }
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for SofteningFactor {
    type Error = ConstraintError;
    fn try_from(eta: u8) -> Result<Self, Self::Error> {
        Self::new(eta)
    }
}

impl From<SofteningFactor> for u8 {
    fn from(s: SofteningFactor) -> u8 {
        s.0
    }
}

/// One (OUT, IN) octant pair bracketing a single human link.
///
/// Joint indices are 0-based; serialized forms use 1-based indices like the
/// robot definition files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintPair {
    out_joint: usize,
    out_octant: OctantId,
    in_joint: usize,
    in_octant: OctantId,
}

impl ConstraintPair {
    pub fn new(
        out_joint: usize,
        out_octant: OctantId,
        in_joint: usize,
        in_octant: OctantId,
    ) -> Result<Self, ConstraintError> {
        if in_joint <= out_joint {
            return Err(ConstraintError::PairOrder {
                out_joint,
                in_joint,
            });
        }
        Ok(Self {
            out_joint,
            out_octant,
            in_joint,
            in_octant,
        })
    }

    pub fn out_joint(self) -> usize {
        self.out_joint
    }

    pub fn out_octant(self) -> OctantId {
        self.out_octant
    }

    pub fn in_joint(self) -> usize {
        self.in_joint
    }

    pub fn in_octant(self) -> OctantId {
        self.in_octant
    }
}

/// A full pose: the (shoulder -> elbow) and (elbow -> wrist) constraint pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoseConstraintSet {
    pairs: [ConstraintPair; 2],
}

impl PoseConstraintSet {
    pub fn new(upper: ConstraintPair, lower: ConstraintPair) -> Result<Self, ConstraintError> {
        if upper.in_joint != lower.out_joint {
            return Err(ConstraintError::UnsharedElbow(
                upper.in_joint,
                lower.out_joint,
            ));
        }
        Ok(Self {
            pairs: [upper, lower],
        })
    }

    pub fn pairs(&self) -> &[ConstraintPair; 2] {
        &self.pairs
    }

    /// OUT octant addressing `joint`, if any.
    pub fn out_octant_at(&self, joint: usize) -> Option<OctantId> {
        self.pairs
            .iter()
            .find(|p| p.out_joint == joint)
            .map(|p| p.out_octant)
    }

    /// IN octant addressing `joint`, if any.
    pub fn in_octant_at(&self, joint: usize) -> Option<OctantId> {
        self.pairs
            .iter()
            .find(|p| p.in_joint == joint)
            .map(|p| p.in_octant)
    }

    /// Largest joint index any constraint addresses.
    pub fn max_joint(&self) -> usize {
        self.pairs[1].in_joint
    }
}

#[derive(Serialize, Deserialize)]
struct ConstraintPairWire {
    out_joint: usize,
    out_octant: u8,
    in_joint: usize,
    in_octant: u8,
}

#[derive(Serialize, Deserialize)]
struct PoseConstraintSetWire {
    pairs: Vec<ConstraintPairWire>,
}

impl Serialize for PoseConstraintSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs = self
            .pairs
            .iter()
            .map(|p| ConstraintPairWire {
                out_joint: p.out_joint + 1,
                out_octant: p.out_octant.index(),
                in_joint: p.in_joint + 1,
                in_octant: p.in_octant.index(),
            })
            .collect();
        PoseConstraintSetWire { pairs }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PoseConstraintSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = PoseConstraintSetWire::deserialize(deserializer)?;
        if wire.pairs.len() != 2 {
            return Err(D::Error::custom(format!(
                "expected exactly 2 constraint pairs, got {}",
                wire.pairs.len()
            )));
        }
        let mut pairs = wire.pairs.into_iter().map(|p| -> Result<_, D::Error> {
            if p.out_joint == 0 || p.in_joint == 0 {
                return Err(D::Error::custom("joint indices are 1-based"));
            }
            ConstraintPair::new(
                p.out_joint - 1,
                OctantId::from_index(p.out_octant).map_err(D::Error::custom)?,
                p.in_joint - 1,
                OctantId::from_index(p.in_octant).map_err(D::Error::custom)?,
            )
            .map_err(D::Error::custom)
        });
        let upper = pairs.next().unwrap()?;
        let lower = pairs.next().unwrap()?;
        PoseConstraintSet::new(upper, lower).map_err(D::Error::custom)
    }
}

fn octant_of_link(from: Vec3, to: Vec3) -> Result<OctantId, ConstraintError> {
    if from.distance(to) <= COINCIDENT_TOL {
        return Err(ConstraintError::DegenerateSkeletonFrame);
    }
    Ok(octant_index(to - from)?)
}

/// Extract the octant constraint set of a human arm frame.
///
/// Human joints are addressed 0 (shoulder), 1 (elbow), 2 (wrist).
pub fn extract_human_pose(
    shoulder: Vec3,
    elbow: Vec3,
    wrist: Vec3,
) -> Result<PoseConstraintSet, ConstraintError> {
    if shoulder.distance(wrist) <= COINCIDENT_TOL {
        return Err(ConstraintError::DegenerateSkeletonFrame);
    }
    let upper = ConstraintPair::new(
        0,
        octant_of_link(shoulder, elbow)?,
        1,
        octant_of_link(elbow, shoulder)?,
    )?;
    let lower = ConstraintPair::new(
        1,
        octant_of_link(elbow, wrist)?,
        2,
        octant_of_link(wrist, elbow)?,
    )?;
    PoseConstraintSet::new(upper, lower)
}

/// Re-address a human constraint set onto the robot's marked joints.
/// Octant identities are unchanged; only the joint addresses move.
pub fn map_to_robot(
    human: &PoseConstraintSet,
    def: &RobotDefinition,
) -> Result<PoseConstraintSet, ConstraintError> {
    let marked = def.marked;
    let joints = def.joint_count();
    if marked.wrist() >= joints {
        return Err(ConstraintError::JointOutOfBounds {
            joint: marked.wrist() + 1,
            joints,
        });
    }
    let upper = ConstraintPair::new(
        marked.shoulder(),
        human.pairs[0].out_octant,
        marked.elbow(),
        human.pairs[0].in_octant,
    )?;
    let lower = ConstraintPair::new(
        marked.elbow(),
        human.pairs[1].out_octant,
        marked.wrist(),
        human.pairs[1].in_octant,
    )?;
    PoseConstraintSet::new(upper, lower)
}

/// Octants within Hamming distance `eta` of `octant`. Always contains the
/// octant itself.
pub fn neighbor_octants(octant: OctantId, eta: SofteningFactor) -> OctantSet {
    OctantId::all()
        .filter(|q| octant.hamming(*q) <= eta.value() as u32)
        .collect()
}

/// Admissible region for a constrained link: the softened neighborhood of its
/// constraint octant.
pub fn admissible_set(octant: OctantId, eta: SofteningFactor) -> OctantSet {
    neighbor_octants(octant, eta)
}

/// Project a direction into the nearest member of an octant set, returned as
/// a unit vector.
///
/// Directions already inside some member come back normalized and otherwise
/// unchanged. Outside, the member whose projection is closest in angle wins;
/// ties break toward the lowest octant index.
pub fn project_into_set(v: Vec3, set: OctantSet) -> Result<Vec3, GeomError> {
    if set.is_empty() {
        return Err(GeomError::EmptyOctantSet);
    }
    if set.contains(octant_index(v)?) {
        return v.normalized();
    }
    let mut best: Option<(f64, Vec3)> = None;
    for octant in set.iter() {
        let projected = project_into_octant(v, octant)?;
        let angle = angle_between(v, projected)?;
        if best.map_or(true, |(a, _)| angle < a) {
            best = Some((angle, projected));
        }
    }
    Ok(best.expect("set is non-empty").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::MarkedJoints;
    use proptest::prelude::*;

    fn oct(i: u8) -> OctantId {
        OctantId::from_index(i).unwrap()
    }

    fn signs_of(v: Vec3) -> OctantId {
        octant_index(v).unwrap()
    }

    #[test]
    fn extraction_matches_sign_inspection() {
        let shoulder = Vec3::ZERO;
        let elbow = Vec3::new(1.0, -1.0, 0.0);
        let wrist = Vec3::new(2.0, 0.0, 1.0);
        let pose = extract_human_pose(shoulder, elbow, wrist).unwrap();
        let [upper, lower] = *pose.pairs();
        assert_eq!(upper.out_joint(), 0);
        assert_eq!(upper.out_octant(), signs_of(Vec3::new(1.0, -1.0, 0.0)));
        assert_eq!(upper.in_octant(), signs_of(Vec3::new(-1.0, 1.0, 0.0)));
        assert_eq!(lower.out_octant(), signs_of(Vec3::new(1.0, 1.0, 1.0)));
        assert_eq!(lower.in_octant(), signs_of(Vec3::new(-1.0, -1.0, -1.0)));
    }

    #[test]
    fn extraction_straight_arm_uses_zero_rule() {
        let pose = extract_human_pose(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        let [upper, lower] = *pose.pairs();
        // +x links classify as (+,+,+); -x links as (-,+,+)
        assert_eq!(upper.out_octant(), oct(1));
        assert_eq!(upper.in_octant(), oct(5));
        assert_eq!(lower.out_octant(), oct(1));
        assert_eq!(lower.in_octant(), oct(5));
    }

    #[test]
    fn extraction_rejects_coincident_joints() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert!(matches!(
            extract_human_pose(p, p, Vec3::new(4.0, 5.0, 6.0)),
            Err(ConstraintError::DegenerateSkeletonFrame)
        ));
        assert!(matches!(
            extract_human_pose(p, Vec3::new(4.0, 5.0, 6.0), p),
            Err(ConstraintError::DegenerateSkeletonFrame)
        ));
    }

    fn pose_with_octants(o: [u8; 4]) -> PoseConstraintSet {
        PoseConstraintSet::new(
            ConstraintPair::new(0, oct(o[0]), 1, oct(o[1])).unwrap(),
            ConstraintPair::new(1, oct(o[2]), 2, oct(o[3])).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mapping_readdresses_joints_and_keeps_octants() {
        // octants 6, 4, 8, 2 re-addressed onto marked joints 2, 3, 5 (1-based)
        let human = pose_with_octants([6, 4, 8, 2]);
        let def = RobotDefinition {
            name: "r".into(),
            base: Vec3::ZERO,
            link_lengths: vec![1.0; 5],
            marked: MarkedJoints::from_one_based(2, 3, 5, 6).unwrap(),
            rest_directions: None,
            transform: None,
        };
        let robot = map_to_robot(&human, &def).unwrap();
        let [upper, lower] = *robot.pairs();
        assert_eq!(
            (upper.out_joint() + 1, upper.out_octant().index()),
            (2, 6)
        );
        assert_eq!((upper.in_joint() + 1, upper.in_octant().index()), (3, 4));
        assert_eq!((lower.out_joint() + 1, lower.out_octant().index()), (3, 8));
        assert_eq!((lower.in_joint() + 1, lower.in_octant().index()), (5, 2));
    }

    #[test]
    fn identity_mapping_preserves_structure() {
        let human = pose_with_octants([3, 7, 1, 5]);
        let def = RobotDefinition {
            name: "r".into(),
            base: Vec3::ZERO,
            link_lengths: vec![1.0, 1.0],
            marked: MarkedJoints::from_one_based(1, 2, 3, 3).unwrap(),
            rest_directions: None,
            transform: None,
        };
        assert_eq!(map_to_robot(&human, &def).unwrap(), human);
    }

    #[test]
    fn mapping_round_trips_through_readdressing() {
        let human = pose_with_octants([2, 5, 6, 3]);
        let def = RobotDefinition {
            name: "r".into(),
            base: Vec3::ZERO,
            link_lengths: vec![1.0; 6],
            marked: MarkedJoints::from_one_based(2, 4, 7, 7).unwrap(),
            rest_directions: None,
            transform: None,
        };
        let robot = map_to_robot(&human, &def).unwrap();
        let back = PoseConstraintSet::new(
            ConstraintPair::new(0, robot.pairs()[0].out_octant(), 1, robot.pairs()[0].in_octant())
                .unwrap(),
            ConstraintPair::new(1, robot.pairs()[1].out_octant(), 2, robot.pairs()[1].in_octant())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(back, human);
    }

    #[test]
    fn neighborhood_sizes_follow_hamming_counts() {
        for o in OctantId::all() {
            for (eta, expect) in [(0u8, 1usize), (1, 4), (2, 7), (3, 8)] {
                let set = neighbor_octants(o, SofteningFactor::new(eta).unwrap());
                assert_eq!(set.len(), expect, "octant {o} eta {eta}");
                assert!(set.contains(o));
            }
        }
    }

    #[test]
    fn neighborhood_members_match_enumeration() {
        // exhaustive oracle: filter all octants by sign-mismatch count
        let expect = |o: OctantId, eta: u8| -> OctantSet {
            OctantId::all()
                .filter(|q| {
                    o.signs()
                        .iter()
                        .zip(q.signs().iter())
                        .filter(|(a, b)| a != b)
                        .count()
                        <= eta as usize
                })
                .collect()
        };
        for o in OctantId::all() {
            for eta in 0..=3u8 {
                assert_eq!(
                    neighbor_octants(o, SofteningFactor::new(eta).unwrap()),
                    expect(o, eta)
                );
            }
        }
        // the two fixed cases called out in review
        let eta1 = SofteningFactor::new(1).unwrap();
        let got = neighbor_octants(oct(1), eta1);
        let want: OctantSet = [oct(1), oct(2), oct(3), oct(5)].into_iter().collect();
        assert_eq!(got, want);
        let got = neighbor_octants(OctantId::from_signs([
            crate::geom::Sign::Neg,
            crate::geom::Sign::Pos,
            crate::geom::Sign::Neg,
        ]), eta1); // octant 6
        let want: OctantSet = [oct(2), oct(5), oct(6), oct(8)].into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn softening_nests_monotonically() {
        for o in OctantId::all() {
            for eta1 in 0..3u8 {
                let small = neighbor_octants(o, SofteningFactor::new(eta1).unwrap());
                let large = neighbor_octants(o, SofteningFactor::new(eta1 + 1).unwrap());
                assert!(small.is_subset_of(large));
                assert!(small.len() < large.len());
            }
        }
    }

    #[test]
    fn project_into_set_single_member_matches_octant_projection() {
        let v = Vec3::new(-1.0, 1.0, 1.0);
        let got = project_into_set(v, OctantSet::singleton(oct(1))).unwrap();
        let want = project_into_octant(v, oct(1)).unwrap();
        assert!(got.distance(want) < 1e-15);
        let inv = 1.0 / 2f64.sqrt();
        assert!(got.distance(Vec3::new(0.0, inv, inv)) < 1e-12);
    }

    #[test]
    fn project_into_set_full_set_is_normalize() {
        let v = Vec3::new(-3.0, 2.0, -0.5);
        let got = project_into_set(v, OctantSet::FULL).unwrap();
        assert!(got.distance(v.normalized().unwrap()) == 0.0);
    }

    #[test]
    fn project_into_set_rejects_empty_and_zero() {
        assert!(matches!(
            project_into_set(Vec3::new(1.0, 1.0, 1.0), OctantSet::EMPTY),
            Err(GeomError::EmptyOctantSet)
        ));
        assert!(project_into_set(Vec3::ZERO, OctantSet::FULL).is_err());
    }

    #[test]
    fn serialization_uses_one_based_joints_and_octant_indices() {
        let pose = pose_with_octants([6, 4, 8, 2]);
        let json = serde_json::to_string(&pose).unwrap();
        assert!(json.contains("\"out_joint\":1"));
        assert!(json.contains("\"in_joint\":3"));
        assert!(json.contains("\"out_octant\":6"));
        let back: PoseConstraintSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pose);
    }

    proptest! {
        #[test]
        fn extraction_is_scale_invariant_about_the_shoulder(
            ex in -5.0f64..5.0, ey in -5.0f64..5.0, ez in -5.0f64..5.0,
            wx in -5.0f64..5.0, wy in -5.0f64..5.0, wz in -5.0f64..5.0,
            scale in 0.1f64..10.0,
        ) {
            let shoulder = Vec3::new(1.0, 2.0, 3.0);
            let elbow = shoulder + Vec3::new(ex, ey, ez);
            let wrist = elbow + Vec3::new(wx, wy, wz);
            prop_assume!(extract_human_pose(shoulder, elbow, wrist).is_ok());
            let scaled_elbow = shoulder + (elbow - shoulder) * scale;
            let scaled_wrist = shoulder + (wrist - shoulder) * scale;
            prop_assume!(extract_human_pose(shoulder, scaled_elbow, scaled_wrist).is_ok());
            let a = extract_human_pose(shoulder, elbow, wrist).unwrap();
            let b = extract_human_pose(shoulder, scaled_elbow, scaled_wrist).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn set_projection_lands_inside_the_set(
            x in -4.0f64..4.0, y in -4.0f64..4.0, z in -4.0f64..4.0,
            o in 1u8..=8, eta in 0u8..=3,
        ) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm_squared() > 1e-9);
            let set = admissible_set(OctantId::from_index(o).unwrap(),
                                     SofteningFactor::new(eta).unwrap());
            let p = project_into_set(v, set).unwrap();
            let inside = set.iter().any(|m| m.closure_contains(p, crate::geom::GEOM_EPS));
            prop_assert!(inside);
        }
    }
}
