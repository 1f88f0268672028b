//! Frames, planar poses, 3D points and upright oriented boxes.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Coordinate frame a quantity is expressed in.
///
/// The object frame is the map frame translated to the object's projected
/// position (no rotation). The table frame has its origin at the table corner
/// on the grid-aligned short edge, x along the short edge and y along the
/// long edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    Map,
    Object,
    Table,
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Projection onto the ground plane.
    pub fn planar(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (*self - *other).norm()
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Heading of the vector, atan2(y, x).
    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn with_z(&self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Planar robot pose. The heading is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "RawPose")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Deserialize)]
struct RawPose {
    x: f64,
    y: f64,
    #[serde(default)]
    heading: f64,
}

impl From<RawPose> for Pose2D {
    fn from(raw: RawPose) -> Self {
        Pose2D::new(raw.x, raw.y, raw.heading)
    }
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

/// Planar rigid transform: rotate by `rotation`, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub translation: Point2,
    pub rotation: f64,
}

impl Default for RigidTransform2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform2D {
    pub fn new(translation: Point2, rotation: f64) -> Self {
        Self {
            translation,
            rotation: normalize_angle(rotation),
        }
    }

    pub fn identity() -> Self {
        Self::new(Point2::new(0.0, 0.0), 0.0)
    }

    pub fn translate(x: f64, y: f64) -> Self {
        Self::new(Point2::new(x, y), 0.0)
    }

    pub fn rotate(rotation: f64) -> Self {
        Self::new(Point2::new(0.0, 0.0), rotation)
    }

    /// The transform whose frame is located at `pose`.
    pub fn from_pose(pose: &Pose2D) -> Self {
        Self::new(pose.position(), pose.heading)
    }

    fn rotate_vec(&self, v: Point2) -> Point2 {
        let (s, c) = self.rotation.sin_cos();
        Point2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        self.rotate_vec(p) + self.translation
    }

    /// Applies the planar part to a 3D point; z is untouched.
    pub fn apply3(&self, p: Point3) -> Point3 {
        self.apply(p.planar()).with_z(p.z)
    }

    pub fn apply_pose(&self, pose: &Pose2D) -> Pose2D {
        let p = self.apply(pose.position());
        Pose2D::new(p.x, p.y, pose.heading + self.rotation)
    }

    pub fn inverse(&self) -> Self {
        let inv = Self::rotate(-self.rotation);
        Self::new(inv.rotate_vec(self.translation) * -1.0, -self.rotation)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform2D) -> Self {
        Self::new(self.apply(other.translation), self.rotation + other.rotation)
    }
}

pub fn transform_pose(pose: &Pose2D, transform: &RigidTransform2D) -> Pose2D {
    transform.apply_pose(pose)
}

/// Box that may rotate only about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point3,
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

impl OrientedBox {
    /// Panics if any half extent is not strictly positive; use
    /// [`OrientedBox::try_new`] for untrusted input.
    pub fn new(center: Point3, half_extents: [f64; 3], yaw: f64) -> Self {
        Self::try_new(center, half_extents, yaw).expect("invalid oriented box")
    }

    pub fn try_new(center: Point3, half_extents: [f64; 3], yaw: f64) -> crate::Result<Self> {
        let b = Self {
            center,
            half_extents,
            yaw: normalize_angle(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !self.center.is_finite() || !self.yaw.is_finite() {
            return Err(crate::Error::Geometry("box has non-finite pose".into()));
        }
        if self.half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(crate::Error::Geometry(format!(
                "box half extents must be positive, got {:?}",
                self.half_extents
            )));
        }
        Ok(())
    }

    /// Expresses `p` in box-local coordinates.
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let (s, c) = self.yaw.sin_cos();
        Point3::new(c * dx + s * dy, -s * dx + c * dy, p.z - self.center.z)
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point3) -> bool {
        let u = self.to_local(p);
        u.x.abs() <= self.half_extents[0]
            && u.y.abs() <= self.half_extents[1]
            && u.z.abs() <= self.half_extents[2]
    }

    /// Closed containment test on the ground-plane footprint only.
    pub fn footprint_contains(&self, p: Point2) -> bool {
        let u = self.to_local(&p.with_z(self.center.z));
        u.x.abs() <= self.half_extents[0] && u.y.abs() <= self.half_extents[1]
    }

    /// Footprint corners in counter-clockwise order.
    pub fn footprint_corners(&self) -> [Point2; 4] {
        let t = RigidTransform2D::new(self.center.planar(), self.yaw);
        let [hx, hy, _] = self.half_extents;
        [
            t.apply(Point2::new(-hx, -hy)),
            t.apply(Point2::new(hx, -hy)),
            t.apply(Point2::new(hx, hy)),
            t.apply(Point2::new(-hx, hy)),
        ]
    }
}

pub fn box_contains(b: &OrientedBox, p: &Point3) -> bool {
    b.contains(p)
}
