//! Analytic primitives (boxes and cylinders, plus composites of both) with
//! exact ray casting. These are the only shapes the simulator knows about;
//! there are no triangle meshes anywhere in the stack.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{Aabb, Pose};

/// Geometry of a single convex primitive, in its own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimitiveKind {
    /// Box centered at the origin with the given half extents.
    Box { half_extents: [f64; 3] },
    /// Cylinder centered at the origin, axis along +z.
    Cylinder { radius: f64, half_height: f64 },
}

/// A primitive plus its pose relative to the owning body/part frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub local_pose: Pose,
}

/// A shape is one or more primitives; composites are just longer lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub primitives: Vec<Primitive>,
}

impl Shape {
    pub fn boxed(half_extents: Vector3<f64>, local_pose: Pose) -> Self {
        Shape {
            primitives: vec![Primitive {
                kind: PrimitiveKind::Box {
                    half_extents: [half_extents.x, half_extents.y, half_extents.z],
                },
                local_pose,
            }],
        }
    }

    pub fn cylinder(radius: f64, half_height: f64, local_pose: Pose) -> Self {
        Shape {
            primitives: vec![Primitive {
                kind: PrimitiveKind::Cylinder {
                    radius,
                    half_height,
                },
                local_pose,
            }],
        }
    }

    /// World-frame AABB of the shape placed at `body_pose`.
    pub fn world_aabb(&self, body_pose: &Pose) -> Aabb {
        let mut out = Aabb::empty();
        for prim in &self.primitives {
            let pose = body_pose * prim.local_pose;
            out.merge(&primitive_world_aabb(&prim.kind, &pose));
        }
        out
    }

    /// True if the world point lies inside (or on) any primitive.
    pub fn contains_world_point(&self, body_pose: &Pose, p: &Point3<f64>, tol: f64) -> bool {
        self.primitives.iter().any(|prim| {
            let local = (body_pose * prim.local_pose).inverse_transform_point(p);
            match prim.kind {
                PrimitiveKind::Box { half_extents } => (0..3)
                    .all(|i| local[i].abs() <= half_extents[i] + tol),
                PrimitiveKind::Cylinder {
                    radius,
                    half_height,
                } => {
                    local.z.abs() <= half_height + tol
                        && (local.x * local.x + local.y * local.y).sqrt() <= radius + tol
                }
            }
        })
    }

    /// Distance from a world point to the shape surface (0 inside).
    pub fn distance_to_surface(&self, body_pose: &Pose, p: &Point3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|prim| {
                let pose = body_pose * prim.local_pose;
                let local = pose.inverse_transform_point(p);
                primitive_signed_surface_distance(&prim.kind, &local).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn primitive_world_aabb(kind: &PrimitiveKind, pose: &Pose) -> Aabb {
    // Transform the local AABB corners; exact for boxes, conservative-tight
    // enough for cylinders at desk scale.
    let (hx, hy, hz) = match kind {
        PrimitiveKind::Box { half_extents } => (half_extents[0], half_extents[1], half_extents[2]),
        PrimitiveKind::Cylinder {
            radius,
            half_height,
        } => (*radius, *radius, *half_height),
    };
    let mut out = Aabb::empty();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = pose.transform_point(&Point3::new(sx * hx, sy * hy, sz * hz));
                out.expand_point(&corner);
            }
        }
    }
    out
}

/// Signed distance to the primitive surface in its local frame (negative inside).
fn primitive_signed_surface_distance(kind: &PrimitiveKind, p: &Point3<f64>) -> f64 {
    match kind {
        PrimitiveKind::Box { half_extents } => {
            let q = Vector3::new(
                p.x.abs() - half_extents[0],
                p.y.abs() - half_extents[1],
                p.z.abs() - half_extents[2],
            );
            let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
            let inside = q.x.max(q.y).max(q.z).min(0.0);
            outside + inside
        }
        PrimitiveKind::Cylinder {
            radius,
            half_height,
        } => {
            let radial = (p.x * p.x + p.y * p.y).sqrt() - radius;
            let axial = p.z.abs() - half_height;
            let outside = (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt();
            let inside = radial.max(axial).min(0.0);
            outside + inside
        }
    }
}

/// Result of a ray cast: ray parameter and outward surface normal in world frame.
#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    pub t: f64,
    pub normal: Vector3<f64>,
}

/// Casts `origin + t * dir` (t > 0, `dir` need not be unit) against the shape
/// at `body_pose`. Returns the nearest hit.
pub fn ray_cast_shape(
    shape: &Shape,
    body_pose: &Pose,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for prim in &shape.primitives {
        let pose = body_pose * prim.local_pose;
        let o = pose.inverse_transform_point(origin);
        let d = pose.inverse_transform_vector(dir);
        let hit = match prim.kind {
            PrimitiveKind::Box { half_extents } => ray_box(&o, &d, &half_extents),
            PrimitiveKind::Cylinder {
                radius,
                half_height,
            } => ray_cylinder(&o, &d, radius, half_height),
        };
        if let Some((t, local_n)) = hit {
            if best.map_or(true, |b| t < b.t) {
                best = Some(RayHit {
                    t,
                    normal: pose.rotation * local_n,
                });
            }
        }
    }
    best
}

fn ray_box(o: &Point3<f64>, d: &Vector3<f64>, h: &[f64; 3]) -> Option<(f64, Vector3<f64>)> {
    let mut tmin = 0.0f64;
    let mut tmax = f64::INFINITY;
    let mut axis_min = usize::MAX;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > h[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let mut t1 = (-h[i] - o[i]) * inv;
        let mut t2 = (h[i] - o[i]) * inv;
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        if t1 > tmin {
            tmin = t1;
            axis_min = i;
        }
        tmax = tmax.min(t2);
        if tmin > tmax {
            return None;
        }
    }
    if axis_min == usize::MAX {
        // Ray origin inside the box; no entry face.
        return None;
    }
    let mut normal = Vector3::zeros();
    normal[axis_min] = if d[axis_min] > 0.0 { -1.0 } else { 1.0 };
    Some((tmin, normal))
}

fn ray_cylinder(
    o: &Point3<f64>,
    d: &Vector3<f64>,
    radius: f64,
    half_height: f64,
) -> Option<(f64, Vector3<f64>)> {
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut consider = |t: f64, n: Vector3<f64>| {
        if t > 1e-12 && best.map_or(true, |(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };

    // Lateral surface.
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        let b = 2.0 * (o.x * d.x + o.y * d.y);
        let c = o.x * o.x + o.y * o.y - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let z = o.z + t * d.z;
                if z.abs() <= half_height {
                    let hit = Point3::new(o.x + t * d.x, o.y + t * d.y, z);
                    let n = Vector3::new(hit.x, hit.y, 0.0) / radius;
                    consider(t, n);
                }
            }
        }
    }

    // Caps.
    if d.z.abs() > 1e-15 {
        for (zc, nz) in [(half_height, 1.0), (-half_height, -1.0)] {
            let t = (zc - o.z) / d.z;
            let x = o.x + t * d.x;
            let y = o.y + t * d.y;
            if x * x + y * y <= radius * radius {
                consider(t, Vector3::new(0.0, 0.0, nz));
            }
        }
    }

    best
}

/// Farthest point of a primitive (at a world pose) along a world direction.
/// This is the support mapping used by the GJK intersection test.
pub fn support_point(kind: &PrimitiveKind, pose: &Pose, dir: &Vector3<f64>) -> Point3<f64> {
    let d = pose.inverse_transform_vector(dir);
    let local = match kind {
        PrimitiveKind::Box { half_extents } => Point3::new(
            half_extents[0] * d.x.signum(),
            half_extents[1] * d.y.signum(),
            half_extents[2] * d.z.signum(),
        ),
        PrimitiveKind::Cylinder {
            radius,
            half_height,
        } => {
            let planar = (d.x * d.x + d.y * d.y).sqrt();
            let (x, y) = if planar > 1e-12 {
                (radius * d.x / planar, radius * d.y / planar)
            } else {
                (0.0, 0.0)
            };
            Point3::new(x, y, half_height * d.z.signum())
        }
    };
    pose.transform_point(&local)
}

/// Convenience: unit vector or `None` when degenerate.
pub fn normalize_or_none(v: &Vector3<f64>) -> Option<Unit<Vector3<f64>>> {
    Unit::try_new(*v, 1e-12)
}
