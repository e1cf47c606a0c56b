//! Shared geometry: pose encoding, axis-aligned boxes, analytic primitives,
//! convex collision tests, a small 3D kd-tree, and PCA local frames.

pub mod collision;
pub mod kdtree;
pub mod pca;
pub mod shapes;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

/// World/body pose. Rotation is a unit quaternion, translation in meters.
pub type Pose = Isometry3<f64>;

/// Encodes a pose as the 7-tuple `[x, y, z, qw, qx, qy, qz]` used by scene
/// documents and persistence records.
pub fn pose_to_seven(pose: &Pose) -> [f64; 7] {
    let t = pose.translation.vector;
    let q = pose.rotation.quaternion();
    [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
}

/// Decodes a 7-tuple `[x, y, z, qw, qx, qy, qz]`. The quaternion is
/// renormalized; a zero quaternion is rejected by the caller's validation.
pub fn pose_from_seven(v: &[f64; 7]) -> Pose {
    let t = Translation3::new(v[0], v[1], v[2]);
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]));
    Isometry3::from_parts(t, q)
}

/// Decodes a 7-tuple whose quaternion is already exactly unit-norm, without
/// renormalizing. Binary persistence uses this so round trips are bit-exact.
pub fn pose_from_seven_exact(v: &[f64; 7]) -> Pose {
    let t = Translation3::new(v[0], v[1], v[2]);
    let q = UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]));
    Isometry3::from_parts(t, q)
}

/// Angle of the relative rotation between two orientations, in radians.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.rotation_to(b).angle()
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn expand_point(&mut self, p: &Point3<f64>) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn merge(&mut self, other: &Aabb) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(other.min[i]);
            self.max[i] = self.max[i].max(other.max[i]);
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extents(&self) -> Vector3<f64> {
        Vector3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn from_points<'a>(points: impl Iterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.expand_point(p);
        }
        b
    }

    /// Distance from `p` to the box surface, 0 inside.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
            d2 += v * v;
        }
        d2.sqrt()
    }
}

/// Linear interpolation between poses: lerp on translation, slerp on rotation.
pub fn interpolate_pose(a: &Pose, b: &Pose, s: f64) -> Pose {
    let t = a.translation.vector.lerp(&b.translation.vector, s);
    let r = a.rotation.slerp(&b.rotation, s);
    Isometry3::from_parts(Translation3::from(t), r)
}
