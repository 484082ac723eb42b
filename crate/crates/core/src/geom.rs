//! Vector math, octant classification, and the octant projection primitive
//! shared by every solver.
//!
//! An octant is one of the 8 regions of a joint-local, world-aligned frame,
//! identified by the sign pattern of (x, y, z). Components equal to zero
//! classify as positive so that every non-zero direction has exactly one
//! octant.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

/// Absolute tolerance for geometric equality checks.
pub const GEOM_EPS: f64 = 1e-9;

/// Errors raised by the geometric primitives.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeomError {
    /// A direction with zero length was supplied where a direction is required.
    #[error("degenerate direction")]
    DegenerateDirection,
    /// A coordinate was NaN or infinite.
    #[error("non-finite coordinate")]
    NonFinite,
    /// An octant index outside 1..=8.
    #[error("octant index {0} out of range 1..=8")]
    OctantIndexOutOfRange(u8),
    /// An empty octant set was used as an admissible region.
    #[error("empty octant set")]
    EmptyOctantSet,
}

/// 3D point / direction. World units; the harness uses centimeters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, rhs: Self) -> f64 {
        self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    #[inline]
    pub fn cross(self, rhs: Self) -> Self {
        Self::new(
            self.y * rhs.z - self.z * rhs.y,
            self.z * rhs.x - self.x * rhs.z,
            self.x * rhs.y - self.y * rhs.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, rhs: Self) -> f64 {
        (self - rhs).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector with this direction; errors on zero or non-finite input.
    pub fn normalized(self) -> Result<Self, GeomError> {
        if !self.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let n = self.norm();
        if n == 0.0 {
            return Err(GeomError::DegenerateDirection);
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n))
    }

    /// Component-wise accessor, i in 0..3.
    #[inline]
    pub fn component(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index {i} out of range"),
        }
    }

    #[inline]
    fn set_component(&mut self, i: usize, v: f64) {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("component index {i} out of range"),
        }
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Sign of one coordinate axis inside an octant label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    /// Classify a coordinate; zero counts as positive.
    #[inline]
    pub fn of(value: f64) -> Self {
        if value < 0.0 {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    #[inline]
    pub fn unit(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Pos => write!(f, "+"),
            Sign::Neg => write!(f, "-"),
        }
    }
}

/// One of the 8 octants of a world-aligned frame.
///
/// Index and sign triple are in bijection:
/// `index = 1 + 4*[sx=-] + 2*[sy=-] + 1*[sz=-]`, so octant 1 is (+,+,+) and
/// octant 8 is (-,-,-).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct OctantId(u8);

impl OctantId {
    /// Build from a 1-based index.
    pub fn from_index(index: u8) -> Result<Self, GeomError> {
        if (1..=8).contains(&index) {
            Ok(Self(index))
        } else {
            Err(GeomError::OctantIndexOutOfRange(index))
        }
    }

    /// Build from a sign triple (sx, sy, sz).
    pub fn from_signs(signs: [Sign; 3]) -> Self {
        let mut index = 1u8;
        if signs[0] == Sign::Neg {
            index += 4;
        }
        if signs[1] == Sign::Neg {
            index += 2;
        }
        if signs[2] == Sign::Neg {
            index += 1;
        }
        Self(index)
    }

    /// 1-based index.
    #[inline]
    pub fn index(self) -> u8 {
        self.0
    }

    /// Sign triple (sx, sy, sz).
    pub fn signs(self) -> [Sign; 3] {
        let bits = self.0 - 1;
        let sign = |b: u8| if b != 0 { Sign::Neg } else { Sign::Pos };
        [sign(bits & 4), sign(bits & 2), sign(bits & 1)]
    }

    /// Number of mismatched sign positions between two octants (0..=3).
    #[inline]
    pub fn hamming(self, other: Self) -> u32 {
        (((self.0 - 1) ^ (other.0 - 1)) as u32).count_ones()
    }

    /// All 8 octants in index order.
    pub fn all() -> impl Iterator<Item = OctantId> {
        (1..=8).map(OctantId)
    }

    /// Unit diagonal of the octant (all components of equal magnitude).
    pub fn diagonal(self) -> Vec3 {
        let s = self.signs();
        let c = 1.0 / 3f64.sqrt();
        Vec3::new(s[0].unit() * c, s[1].unit() * c, s[2].unit() * c)
    }

    /// True when `v` lies in the closed octant region, treating components
    /// within `tol * |v|` of zero as on the boundary (and therefore inside).
    ///
    /// This is the closure test used for constraint satisfaction; the strict
    /// classification in [`octant_contains`] assigns zero components to the
    /// positive side instead.
    pub fn closure_contains(self, v: Vec3, tol: f64) -> bool {
        let bound = tol * v.norm();
        let signs = self.signs();
        (0..3).all(|i| {
            let c = v.component(i);
            match signs[i] {
                Sign::Pos => c >= -bound,
                Sign::Neg => c <= bound,
            }
        })
    }
}

impl TryFrom<u8> for OctantId {
    type Error = GeomError;
    fn try_from(index: u8) -> Result<Self, Self::Error> {
        Self::from_index(index)
    }
}

impl From<OctantId> for u8 {
    fn from(o: OctantId) -> u8 {
        o.index()
    }
}

impl fmt::Display for OctantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.signs();
        write!(f, "{}({}{}{})", self.0, s[0], s[1], s[2])
    }
}

/// Subset of the 8 octants, bitset-backed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct OctantSet(u8);

impl OctantSet {
    pub const EMPTY: Self = Self(0);

    /// The full set of all 8 octants.
    pub const FULL: Self = Self(0xff);

    pub fn singleton(o: OctantId) -> Self {
        let mut s = Self::EMPTY;
        s.insert(o);
        s
    }

    #[inline]
    pub fn insert(&mut self, o: OctantId) {
        self.0 |= 1 << (o.index() - 1);
    }

    #[inline]
    pub fn contains(self, o: OctantId) -> bool {
        self.0 & (1 << (o.index() - 1)) != 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = OctantId> {
        OctantId::all().filter(move |o| self.contains(*o))
    }
}

impl FromIterator<OctantId> for OctantSet {
    fn from_iter<T: IntoIterator<Item = OctantId>>(iter: T) -> Self {
        let mut s = Self::EMPTY;
        for o in iter {
            s.insert(o);
        }
        s
    }
}

impl fmt::Display for OctantSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for o in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{}", o.index())?;
            first = false;
        }
        write!(f, "}}")
    }
}

fn require_direction(v: Vec3) -> Result<(), GeomError> {
    if !v.is_finite() {
        return Err(GeomError::NonFinite);
    }
    if v.norm_squared() == 0.0 {
        return Err(GeomError::DegenerateDirection);
    }
    Ok(())
}

/// Octant whose sign triple matches `sign(v)` component-wise, with zero
/// components classified as positive.
pub fn octant_index(v: Vec3) -> Result<OctantId, GeomError> {
    require_direction(v)?;
    Ok(OctantId::from_signs([
        Sign::of(v.x),
        Sign::of(v.y),
        Sign::of(v.z),
    ]))
}

/// True iff `octant_index(v)` equals `octant`.
pub fn octant_contains(octant: OctantId, v: Vec3) -> Result<bool, GeomError> {
    Ok(octant_index(v)? == octant)
}

/// Euclidean projection of a direction onto the closed octant region,
/// returned as a unit vector.
///
/// Directions already inside come back normalized and otherwise unchanged.
/// Outside, every sign-violating component is clamped to zero, which lands on
/// the nearest face (one violation) or edge/axis (two violations). When
/// clamping cancels the whole vector the octant diagonal is returned; that is
/// the sign-symmetric choice for antipodal input.
pub fn project_into_octant(v: Vec3, octant: OctantId) -> Result<Vec3, GeomError> {
    require_direction(v)?;
    if octant_index(v)? == octant {
        return v.normalized();
    }
    let signs = octant.signs();
    let mut clamped = v;
    for i in 0..3 {
        let c = v.component(i);
        let violates = match signs[i] {
            Sign::Pos => c < 0.0,
            Sign::Neg => c > 0.0,
        };
        if violates {
            clamped.set_component(i, 0.0);
        }
    }
    if clamped.norm_squared() == 0.0 {
        return Ok(octant.diagonal());
    }
    clamped.normalized()
}

/// Angle between two directions in radians, in [0, pi].
///
/// Computed as atan2(|u x v|, u.v), which is exact for parallel and
/// anti-parallel inputs where the clamped-arccos form loses precision.
pub fn angle_between(u: Vec3, v: Vec3) -> Result<f64, GeomError> {
    require_direction(u)?;
    require_direction(v)?;
    Ok(u.cross(v).norm().atan2(u.dot(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_vec_close(a: Vec3, b: Vec3, tol: f64) {
        assert!(
            a.distance(b) <= tol,
            "expected {b} within {tol}, got {a} (distance {})",
            a.distance(b)
        );
    }

    #[test]
    fn index_sign_bijection() {
        for o in OctantId::all() {
            assert_eq!(OctantId::from_signs(o.signs()), o);
        }
        assert_eq!(
            OctantId::from_signs([Sign::Pos, Sign::Pos, Sign::Pos]).index(),
            1
        );
        assert_eq!(
            OctantId::from_signs([Sign::Neg, Sign::Neg, Sign::Neg]).index(),
            8
        );
    }

    #[test]
    fn octant_index_examples() {
        assert_eq!(octant_index(Vec3::new(1.0, 2.0, 3.0)).unwrap().index(), 1);
        assert_eq!(octant_index(Vec3::new(-1.0, 2.0, -3.0)).unwrap().index(), 6);
        // zero components classify as positive
        assert_eq!(octant_index(Vec3::new(0.0, 1.0, 1.0)).unwrap().index(), 1);
        assert_eq!(
            octant_index(Vec3::ZERO),
            Err(GeomError::DegenerateDirection)
        );
        assert_eq!(
            octant_index(Vec3::new(f64::NAN, 0.0, 0.0)),
            Err(GeomError::NonFinite)
        );
    }

    #[test]
    fn octant_contains_examples() {
        let ppp = OctantId::from_index(1).unwrap();
        assert!(octant_contains(ppp, Vec3::new(1.0, 1.0, 1.0)).unwrap());
        assert!(!octant_contains(ppp, Vec3::new(-1.0, 1.0, 1.0)).unwrap());
        let npn = OctantId::from_signs([Sign::Neg, Sign::Pos, Sign::Neg]);
        assert!(octant_contains(npn, Vec3::new(-2.0, 5.0, -0.1)).unwrap());
        assert!(octant_contains(ppp, Vec3::ZERO).is_err());
    }

    #[test]
    fn projection_one_violation_lands_on_face() {
        let ppp = OctantId::from_index(1).unwrap();
        let p = project_into_octant(Vec3::new(1.0, 1.0, -1.0), ppp).unwrap();
        assert_vec_close(p, Vec3::new(SQRT2_INV, SQRT2_INV, 0.0), 1e-12);
    }

    #[test]
    fn projection_inside_is_identity() {
        let ppp = OctantId::from_index(1).unwrap();
        let p = project_into_octant(Vec3::new(1.0, 1.0, 1.0), ppp).unwrap();
        let d = 1.0 / 3f64.sqrt();
        assert_vec_close(p, Vec3::new(d, d, d), 1e-12);
    }

    #[test]
    fn projection_antipodal_resolves_to_diagonal() {
        let ppp = OctantId::from_index(1).unwrap();
        let p = project_into_octant(Vec3::new(-1.0, -1.0, -1.0), ppp).unwrap();
        assert_vec_close(p, ppp.diagonal(), 1e-12);
        // two violations plus a zero component also cancel entirely
        let q = project_into_octant(Vec3::new(0.0, -1.0, -2.0), ppp).unwrap();
        assert_vec_close(q, ppp.diagonal(), 1e-12);
    }

    #[test]
    fn angle_between_examples() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert!((angle_between(x, y).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let d = Vec3::new(1.0, 1.0, 0.0);
        assert_eq!(angle_between(d, d).unwrap(), 0.0);
        assert!((angle_between(x, -x).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert!(angle_between(x, Vec3::ZERO).is_err());
    }

    #[test]
    fn hamming_counts_mismatched_signs() {
        let o1 = OctantId::from_index(1).unwrap();
        let o8 = OctantId::from_index(8).unwrap();
        assert_eq!(o1.hamming(o1), 0);
        assert_eq!(o1.hamming(o8), 3);
        for a in OctantId::all() {
            for b in OctantId::all() {
                let expected = a
                    .signs()
                    .iter()
                    .zip(b.signs().iter())
                    .filter(|(x, y)| x != y)
                    .count() as u32;
                assert_eq!(a.hamming(b), expected);
            }
        }
    }

    #[test]
    fn octant_set_operations() {
        let mut s = OctantSet::EMPTY;
        assert!(s.is_empty());
        let o3 = OctantId::from_index(3).unwrap();
        s.insert(o3);
        s.insert(o3);
        assert_eq!(s.len(), 1);
        assert!(s.contains(o3));
        assert!(s.is_subset_of(OctantSet::FULL));
        assert_eq!(OctantSet::FULL.len(), 8);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![o3]);
    }

    proptest! {
        #[test]
        fn classification_is_self_consistent(
            x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0,
        ) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm_squared() > 0.0);
            let o = octant_index(v).unwrap();
            prop_assert!(octant_contains(o, v).unwrap());
        }

        #[test]
        fn projection_is_idempotent_and_lands_in_closure(
            x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0,
            idx in 1u8..=8,
        ) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm_squared() > 1e-12);
            let o = OctantId::from_index(idx).unwrap();
            let p = project_into_octant(v, o).unwrap();
            prop_assert!((p.norm() - 1.0).abs() < 1e-12);
            prop_assert!(o.closure_contains(p, GEOM_EPS));
            let p2 = project_into_octant(p, o).unwrap();
            prop_assert!(p.distance(p2) <= 1e-12);
        }
    }
}
