//! Antipodal grasp synthesis on labeled point clouds: candidate sampling,
//! 2D-region filtering, and gripper collision pruning.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::GraspConfig;
use crate::error::{Error, Result};
use crate::geom::collision::primitives_intersect;
use crate::geom::kdtree::KdTree;
use crate::geom::shapes::PrimitiveKind;
use crate::geom::Pose;
use crate::sim::{Camera, PointCloud, Scene};

/// Cloud points required before grasp synthesis will run.
pub const MIN_TARGET_POINTS: usize = 50;

/// Cap on first-contact samples; larger targets are subsampled with the
/// configured seed.
const MAX_FIRST_CONTACTS: usize = 512;

/// A scored two-finger grasp hypothesis.
///
/// `pose` is the end-effector frame at the grasp: origin at the contact
/// midpoint, +x the closing axis (fingers separate along ±x), +z the approach
/// direction pointing into the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidate {
    pub pose: Pose,
    /// Alignment × centrality, in [0, 1].
    pub score: f64,
    /// Antipodal contact pair on the target surface.
    pub contacts: [Point3<f64>; 2],
}

/// Axis-aligned pixel-space box, continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl PixelBox {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// Intersection with the image rectangle `[0, W] × [0, H]`.
    pub fn clamped(&self, width: usize, height: usize) -> PixelBox {
        PixelBox {
            u_min: self.u_min.max(0.0),
            v_min: self.v_min.max(0.0),
            u_max: self.u_max.min(width as f64),
            v_max: self.v_max.min(height as f64),
        }
    }
}

/// Samples antipodal contact pairs on the target's labeled cloud points.
///
/// A pair qualifies when the surface normals oppose within the configured
/// angle tolerance and the contacts sit no farther apart than the gripper
/// opening. Each sampled first contact keeps its best-aligned partner; the
/// candidate score is the product of alignment (how antipodal the pair is)
/// and centrality (how close the grasp midpoint sits to the target centroid).
/// Deterministic for a fixed cloud and `cfg.seed`.
pub fn generate_candidates(
    cloud: &PointCloud,
    target_label: u32,
    cfg: &GraspConfig,
) -> Result<Vec<GraspCandidate>> {
    let idx = cloud.indices_with_label(target_label);
    if idx.len() < MIN_TARGET_POINTS {
        return Err(Error::Perception(format!(
            "grasp synthesis needs at least {MIN_TARGET_POINTS} target points, got {}",
            idx.len()
        )));
    }
    let points: Vec<Point3<f64>> = idx.iter().map(|&i| cloud.points[i]).collect();
    let normals: Vec<Vector3<f64>> = idx.iter().map(|&i| cloud.normals[i]).collect();

    let n = points.len();
    let centroid = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n as f64);
    let spread = (points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n as f64).max(1e-6);

    let firsts: Vec<usize> = if n <= MAX_FIRST_CONTACTS {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut picked = rand::seq::index::sample(&mut rng, n, MAX_FIRST_CONTACTS).into_vec();
        picked.sort_unstable();
        picked
    };

    let cos_opposed = cfg.normal_angle_tol.cos();
    let mut out = Vec::new();
    for &i in &firsts {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            let span = points[j] - points[i];
            let width = span.norm();
            if width < 1e-6 || width > cfg.max_gripper_width {
                continue;
            }
            if normals[i].dot(&normals[j]) > -cos_opposed {
                continue;
            }
            let u = span / width;
            // Product of cosines: normals anti-parallel to each other and
            // aligned with the closing line. 1 for a perfect antipodal pair.
            let alignment = (-normals[i].dot(&u)).max(0.0)
                * normals[j].dot(&u).max(0.0)
                * (-normals[i].dot(&normals[j])).max(0.0);
            if alignment <= 0.0 {
                continue;
            }
            if best.map_or(true, |(a, _)| alignment > a) {
                best = Some((alignment, j));
            }
        }
        if let Some((alignment, j)) = best {
            let mid = Point3::from(0.5 * (points[i].coords + points[j].coords));
            let centrality = 1.0 / (1.0 + (mid - centroid).norm() / spread);
            out.push(GraspCandidate {
                pose: grasp_pose(&points[i], &points[j]),
                score: alignment * centrality,
                contacts: [points[i], points[j]],
            });
        }
    }
    Ok(out)
}

/// End-effector frame for a contact pair: origin at the midpoint, +x along
/// the closing line, +z (the approach) steered as close to straight down as
/// the closing axis allows so free-standing grasps come from above.
fn grasp_pose(p1: &Point3<f64>, p2: &Point3<f64>) -> Pose {
    let x = (p2 - p1).normalize();
    let mut approach = -Vector3::z() - x * (-Vector3::z()).dot(&x);
    if approach.norm_squared() < 1e-8 {
        // Closing axis is vertical: fall back to a horizontal approach.
        approach = Vector3::x() - x * x.x;
        if approach.norm_squared() < 1e-8 {
            approach = Vector3::y() - x * x.y;
        }
    }
    let z = approach.normalize();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Isometry3::from_parts(
        Translation3::from(0.5 * (p1.coords + p2.coords)),
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}

/// Keeps candidates whose contacts touch the cloud content of a 2D image
/// region: the box is back-projected by selecting every cloud point whose
/// projection falls inside it, and a candidate survives when both contacts
/// have a selected neighbor within `cfg.region_tol`. Preserves input order;
/// an empty region yields an empty subset.
pub fn filter_by_region(
    cands: &[GraspCandidate],
    box2d: &PixelBox,
    camera: &Camera,
    cloud: &PointCloud,
    cfg: &GraspConfig,
) -> Vec<GraspCandidate> {
    let b = box2d.clamped(camera.width, camera.height);
    let selected: Vec<Point3<f64>> = cloud
        .points
        .iter()
        .filter(|p| camera.project(p).is_some_and(|(u, v, _)| b.contains(u, v)))
        .cloned()
        .collect();
    if selected.is_empty() {
        return Vec::new();
    }
    let tree = KdTree::build(&selected);
    cands
        .iter()
        .filter(|c| {
            c.contacts
                .iter()
                .all(|ct| tree.has_neighbor_within(ct, cfg.region_tol))
        })
        .cloned()
        .collect()
}

/// Open-gripper collision volume: two finger boxes plus a palm box, in the
/// end-effector frame (+x closing, +z approach). Fingertips reach 2.5 cm past
/// the contact plane so grasps pressed against backing geometry are rejected.
pub fn gripper_volume(pose: &Pose, cfg: &GraspConfig) -> Vec<(PrimitiveKind, Pose)> {
    const FINGER_HALF: [f64; 3] = [0.005, 0.010, 0.0325];
    const FINGER_CENTER_Z: f64 = -0.0075; // spans z in [-0.04, 0.025]
    const PALM_HALF_YZ: [f64; 2] = [0.015, 0.010];
    const PALM_CENTER_Z: f64 = -0.05; // spans z in [-0.06, -0.04]
    const CLEARANCE: f64 = 0.002;

    let finger_x = 0.5 * cfg.max_gripper_width + FINGER_HALF[0] + CLEARANCE;
    let at = |x: f64, z: f64| pose * Isometry3::translation(x, 0.0, z);
    vec![
        (
            PrimitiveKind::Box {
                half_extents: FINGER_HALF,
            },
            at(-finger_x, FINGER_CENTER_Z),
        ),
        (
            PrimitiveKind::Box {
                half_extents: FINGER_HALF,
            },
            at(finger_x, FINGER_CENTER_Z),
        ),
        (
            PrimitiveKind::Box {
                half_extents: [
                    finger_x + FINGER_HALF[0],
                    PALM_HALF_YZ[0],
                    PALM_HALF_YZ[1],
                ],
            },
            at(0.0, PALM_CENTER_Z),
        ),
    ]
}

/// True when the gripper volume at `pose` intersects any scene shape other
/// than the target body. Every articulated part counts as an obstacle.
pub fn gripper_collides(scene: &Scene, pose: &Pose, target_body: &str, cfg: &GraspConfig) -> bool {
    let boxes = gripper_volume(pose, cfg);
    let hits = |shape: &crate::geom::shapes::Shape, shape_pose: &Pose| {
        shape.primitives.iter().any(|prim| {
            let world = shape_pose * prim.local_pose;
            boxes
                .iter()
                .any(|(kind, at)| primitives_intersect(kind, at, &prim.kind, &world))
        })
    };
    for obj in &scene.objects {
        for (pi, part) in obj.parts.iter().enumerate() {
            if hits(&part.shape, &obj.part_pose(pi)) {
                return true;
            }
        }
    }
    for body in &scene.rigid {
        if body.id == target_body {
            continue;
        }
        if hits(&body.shape, &body.pose) {
            return true;
        }
    }
    false
}

/// Removes candidates whose gripper volume at the grasp pose intersects any
/// non-target shape. Preserves input order.
pub fn prune_collisions(
    cands: &[GraspCandidate],
    scene: &Scene,
    target_body: &str,
    cfg: &GraspConfig,
) -> Vec<GraspCandidate> {
    cands
        .iter()
        .filter(|c| !gripper_collides(scene, &c.pose, target_body, cfg))
        .cloned()
        .collect()
}

/// Argmax-score grasp; ties break to the lowest index. An empty feasible set
/// is the caller's signal to retry or replan.
pub fn select_grasp(feasible: &[GraspCandidate]) -> Result<&GraspCandidate> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in feasible.iter().enumerate() {
        if best.map_or(true, |(_, s)| c.score > s) {
            best = Some((i, c.score));
        }
    }
    best.map(|(i, _)| &feasible[i])
        .ok_or_else(|| Error::GraspSelection("no feasible grasp candidates".into()))
}
