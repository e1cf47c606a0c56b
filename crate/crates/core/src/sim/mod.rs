//! Kinematic scene simulation: articulated objects with 1-DoF joints, rigid
//! bodies, a free-flying end effector, and a constraint-projection step.
//!
//! No dynamics — grasping snaps the gripper to a handle or body within a
//! tolerance, and motion while attached to an articulated part is projected
//! onto the joint's constraint manifold.

pub mod descriptor;
pub mod predicate;
pub mod render;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use std::path::Path;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geom::shapes::Shape;
use crate::geom::{pose_from_seven, pose_to_seven, rotation_angle_between, Aabb, Pose};
use descriptor::{
    ArticulatedDoc, CameraDoc, JointDoc, JointKindDoc, PartDoc, PartRefDoc, RegionDoc, RigidDoc,
    SceneDoc, ShapeDoc,
};

pub use predicate::SuccessCondition;
pub use render::{CameraFrame, LabelTable, LabelTarget, Observation, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Prismatic,
    Revolute,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub kind: JointKind,
    /// Unit axis in the joint frame.
    pub axis: Unit<Vector3<f64>>,
    /// Joint frame in the object base frame; the axis line passes through its
    /// origin.
    pub origin: Pose,
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    /// Fraction of commanded motion lost while dragging this joint, in [0, 1).
    pub friction: f64,
}

impl Joint {
    /// Displacement transform of the joint at its current value, applied in
    /// the joint frame.
    fn motion(&self) -> Pose {
        match self.kind {
            JointKind::Prismatic => {
                Isometry3::from_parts(
                    Translation3::from(self.axis.into_inner() * self.value),
                    UnitQuaternion::identity(),
                )
            }
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&self.axis, self.value),
            ),
        }
    }

    /// Joint value as a fraction of its range (0 at `lo`).
    pub fn frac(&self) -> f64 {
        if self.hi > self.lo {
            (self.value - self.lo) / (self.hi - self.lo)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Part {
    pub id: String,
    pub shape: Shape,
    /// Which joint drives this part; static parts have none.
    pub joint_index: Option<usize>,
    /// Handle frame in the part frame.
    pub handle_pose: Option<Pose>,
}

#[derive(Debug, Clone)]
pub struct ArticulatedObject {
    pub id: String,
    pub category: String,
    pub base_pose: Pose,
    pub joints: Vec<Joint>,
    pub parts: Vec<Part>,
}

impl ArticulatedObject {
    /// World pose of a part's frame at the current joint values.
    pub fn part_pose(&self, part_index: usize) -> Pose {
        let part = &self.parts[part_index];
        match part.joint_index {
            None => self.base_pose,
            Some(j) => {
                let joint = &self.joints[j];
                self.base_pose * joint.origin * joint.motion()
            }
        }
    }

    /// World handle frame of a part, if it has one.
    pub fn handle_world(&self, part_index: usize) -> Option<Pose> {
        let handle = self.parts[part_index].handle_pose?;
        Some(self.part_pose(part_index) * handle)
    }

    /// World-frame axis line of a joint: a point on the line and its direction.
    pub fn joint_world_line(&self, joint_index: usize) -> (Point3<f64>, Unit<Vector3<f64>>) {
        let frame = self.base_pose * self.joints[joint_index].origin;
        let dir = frame.rotation * self.joints[joint_index].axis;
        (Point3::from(frame.translation.vector), dir)
    }

    pub fn part_index(&self, part_id: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.id == part_id)
    }

    /// First part driven by the given joint.
    pub fn part_for_joint(&self, joint_index: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.joint_index == Some(joint_index))
    }
}

#[derive(Debug, Clone)]
pub struct RigidBody {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
    pub graspable: bool,
}

#[derive(Debug, Clone)]
pub struct Region {
    pub id: String,
    /// (object id, part id) the region rides on; `None` → world frame.
    pub attached_to: Option<(String, String)>,
    pub aabb: Aabb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attachment {
    /// Carrying a rigid body: `body pose = ee_pose * grasp_offset`.
    Rigid { body: String, grasp_offset: Pose },
    /// Holding an articulated part's handle; the ee rides the handle frame.
    Part { object: String, part: String },
}

#[derive(Debug, Clone)]
pub struct RobotState {
    pub ee_pose: Pose,
    pub gripper: Gripper,
    pub attached: Option<Attachment>,
}

impl Default for RobotState {
    fn default() -> Self {
        RobotState {
            ee_pose: Isometry3::identity(),
            gripper: Gripper::Open,
            attached: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Camera {
    pub id: String,
    /// Camera-to-world; +z looks into the scene.
    pub pose: Pose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// World-frame ray through the center of pixel (u, v). The direction is
    /// scaled so the ray parameter equals z-depth in the camera frame.
    pub fn ray(&self, u: usize, v: usize) -> (Point3<f64>, Vector3<f64>) {
        let d = Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        );
        (
            Point3::from(self.pose.translation.vector),
            self.pose.rotation * d,
        )
    }

    /// Projects a world point to continuous pixel coordinates and z-depth.
    /// Returns `None` for points at or behind the camera plane.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.pose.inverse_transform_point(p);
        if c.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
            c.z,
        ))
    }

    /// World point at the center of pixel (u, v) at the given z-depth.
    pub fn back_project(&self, u: usize, v: usize, depth: f64) -> Point3<f64> {
        let c = Point3::new(
            (u as f64 + 0.5 - self.cx) / self.fx * depth,
            (v as f64 + 0.5 - self.cy) / self.fy * depth,
            depth,
        );
        self.pose.transform_point(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GripperCmd {
    Open,
    Close,
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// Body-frame twist: translation (m) and rotation (axis-angle, rad),
    /// both expressed in the end effector's current frame.
    Delta {
        translation: Vector3<f64>,
        rotation: Vector3<f64>,
    },
    /// Jump to an absolute world pose. The controller is responsible for
    /// splitting long motions into `max_step` deltas; this is applied whole.
    Absolute(Pose),
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub motion: Motion,
    pub gripper: GripperCmd,
}

impl Action {
    pub fn delta(translation: Vector3<f64>, rotation: Vector3<f64>) -> Action {
        Action {
            motion: Motion::Delta {
                translation,
                rotation,
            },
            gripper: GripperCmd::Hold,
        }
    }

    pub fn absolute(target: Pose) -> Action {
        Action {
            motion: Motion::Absolute(target),
            gripper: GripperCmd::Hold,
        }
    }

    pub fn close() -> Action {
        Action {
            motion: Motion::Hold,
            gripper: GripperCmd::Close,
        }
    }

    pub fn open() -> Action {
        Action {
            motion: Motion::Hold,
            gripper: GripperCmd::Open,
        }
    }

    pub fn hold() -> Action {
        Action {
            motion: Motion::Hold,
            gripper: GripperCmd::Hold,
        }
    }
}

/// A shape placed in the world, tagged with its label-table index.
pub struct ShapeInstance<'a> {
    pub label: u32,
    pub shape: &'a Shape,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub cameras: Vec<Camera>,
    pub objects: Vec<ArticulatedObject>,
    pub rigid: Vec<RigidBody>,
    pub regions: Vec<Region>,
    pub robot: RobotState,
    /// Steps applied since load.
    pub steps: usize,
    pub cfg: SimConfig,
}

impl Scene {
    pub fn from_doc(doc: &SceneDoc, cfg: &SimConfig) -> Result<Scene> {
        doc.validate()?;
        let cameras = doc
            .cameras
            .iter()
            .map(|c| Camera {
                id: c.id.clone(),
                pose: pose_from_seven(&c.pose),
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                width: c.width as usize,
                height: c.height as usize,
            })
            .collect();
        let objects = doc
            .articulated
            .iter()
            .map(|o| ArticulatedObject {
                id: o.id.clone(),
                category: o.category.clone(),
                base_pose: pose_from_seven(&o.base_pose),
                joints: o
                    .joints
                    .iter()
                    .map(|j| Joint {
                        kind: match j.kind {
                            JointKindDoc::Prismatic => JointKind::Prismatic,
                            JointKindDoc::Revolute => JointKind::Revolute,
                        },
                        axis: Unit::new_normalize(Vector3::new(j.axis[0], j.axis[1], j.axis[2])),
                        origin: pose_from_seven(&j.origin),
                        lo: j.lo,
                        hi: j.hi,
                        value: j.init.unwrap_or(j.lo),
                        friction: j.friction,
                    })
                    .collect(),
                parts: o
                    .parts
                    .iter()
                    .map(|p| Part {
                        id: p.part_id.clone(),
                        shape: shape_from_doc(&p.shape),
                        joint_index: p.joint_index,
                        handle_pose: p.handle_pose.as_ref().map(pose_from_seven),
                    })
                    .collect(),
            })
            .collect();
        let rigid = doc
            .rigid
            .iter()
            .map(|r| RigidBody {
                id: r.id.clone(),
                shape: shape_from_doc(&r.shape),
                pose: pose_from_seven(&r.pose),
                graspable: r.graspable,
            })
            .collect();
        let regions = doc
            .regions
            .iter()
            .map(|r| Region {
                id: r.id.clone(),
                attached_to: r
                    .attached_to
                    .as_ref()
                    .map(|a| (a.object.clone(), a.part.clone())),
                aabb: r.aabb,
            })
            .collect();
        Ok(Scene {
            cameras,
            objects,
            rigid,
            regions,
            robot: RobotState::default(),
            steps: 0,
            cfg: cfg.clone(),
        })
    }

    pub fn parse(text: &str, cfg: &SimConfig) -> Result<Scene> {
        Scene::from_doc(&SceneDoc::parse(text)?, cfg)
    }

    pub fn load(path: &Path, cfg: &SimConfig) -> Result<Scene> {
        let text = std::fs::read_to_string(path)?;
        Scene::parse(&text, cfg).map_err(|e| match e {
            Error::Parse { path: p, message } => Error::Parse {
                path: format!("{}: {p}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Snapshot of the current state as a document (joint `init` = current
    /// value, rigid poses current).
    pub fn to_doc(&self) -> SceneDoc {
        SceneDoc {
            cameras: self
                .cameras
                .iter()
                .map(|c| CameraDoc {
                    id: c.id.clone(),
                    pose: pose_to_seven(&c.pose),
                    fx: c.fx,
                    fy: c.fy,
                    cx: c.cx,
                    cy: c.cy,
                    width: c.width as u32,
                    height: c.height as u32,
                })
                .collect(),
            articulated: self
                .objects
                .iter()
                .map(|o| ArticulatedDoc {
                    id: o.id.clone(),
                    category: o.category.clone(),
                    base_pose: pose_to_seven(&o.base_pose),
                    joints: o
                        .joints
                        .iter()
                        .map(|j| JointDoc {
                            kind: match j.kind {
                                JointKind::Prismatic => JointKindDoc::Prismatic,
                                JointKind::Revolute => JointKindDoc::Revolute,
                            },
                            axis: [j.axis.x, j.axis.y, j.axis.z],
                            origin: pose_to_seven(&j.origin),
                            lo: j.lo,
                            hi: j.hi,
                            init: Some(j.value),
                            friction: j.friction,
                        })
                        .collect(),
                    parts: o
                        .parts
                        .iter()
                        .map(|p| PartDoc {
                            part_id: p.id.clone(),
                            shape: shape_to_doc(&p.shape),
                            joint_index: p.joint_index,
                            handle_pose: p.handle_pose.as_ref().map(pose_to_seven),
                        })
                        .collect(),
                })
                .collect(),
            rigid: self
                .rigid
                .iter()
                .map(|r| RigidDoc {
                    id: r.id.clone(),
                    shape: shape_to_doc(&r.shape),
                    pose: pose_to_seven(&r.pose),
                    graspable: r.graspable,
                })
                .collect(),
            regions: self
                .regions
                .iter()
                .map(|r| RegionDoc {
                    id: r.id.clone(),
                    attached_to: r.attached_to.as_ref().map(|(o, p)| PartRefDoc {
                        object: o.clone(),
                        part: p.clone(),
                    }),
                    aabb: r.aabb,
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_doc().to_json())?;
        Ok(())
    }

    pub fn object(&self, id: &str) -> Result<&ArticulatedObject> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn body(&self, id: &str) -> Result<&RigidBody> {
        self.rigid
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn region(&self, id: &str) -> Result<&Region> {
        self.regions
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// World pose of a region's box frame (identity for world regions).
    pub fn region_frame(&self, region: &Region) -> Result<Pose> {
        match &region.attached_to {
            None => Ok(Isometry3::identity()),
            Some((obj_id, part_id)) => {
                let obj = self.object(obj_id)?;
                let pi = obj
                    .part_index(part_id)
                    .ok_or_else(|| Error::UnknownId(format!("{obj_id}/{part_id}")))?;
                Ok(obj.part_pose(pi))
            }
        }
    }

    /// All shapes at their current world poses, tagged with label indices.
    /// Order matches the label table: articulated parts first, then rigid
    /// bodies.
    pub fn instances(&self) -> Vec<ShapeInstance<'_>> {
        let mut out = Vec::new();
        let mut label = 1u32;
        for obj in &self.objects {
            for (pi, part) in obj.parts.iter().enumerate() {
                out.push(ShapeInstance {
                    label,
                    shape: &part.shape,
                    pose: obj.part_pose(pi),
                });
                label += 1;
            }
        }
        for body in &self.rigid {
            out.push(ShapeInstance {
                label,
                shape: &body.shape,
                pose: body.pose,
            });
            label += 1;
        }
        out
    }

    /// Applies one action: motion first (projected onto the joint constraint
    /// while attached to an articulated part), then the gripper command.
    /// Infeasible motion is projected onto the constraint or clamped at the
    /// joint limits, never rejected. Deltas are applied as commanded; keeping
    /// them under `max_step` is the caller's contract.
    pub fn step(&mut self, action: &Action) {
        match &action.motion {
            Motion::Hold => {}
            Motion::Delta {
                translation,
                rotation,
            } => self.apply_delta(translation, rotation),
            Motion::Absolute(target) => {
                let t_body = self
                    .robot
                    .ee_pose
                    .rotation
                    .inverse_transform_vector(&(target.translation.vector
                        - self.robot.ee_pose.translation.vector));
                let r_body = (self.robot.ee_pose.rotation.inverse() * target.rotation)
                    .scaled_axis();
                self.apply_delta(&t_body, &r_body);
            }
        }
        match action.gripper {
            GripperCmd::Hold => {}
            GripperCmd::Open => {
                self.robot.gripper = Gripper::Open;
                self.robot.attached = None;
            }
            GripperCmd::Close => {
                self.robot.gripper = Gripper::Closed;
                if self.robot.attached.is_none() {
                    self.try_attach();
                }
            }
        }
        self.steps += 1;
    }

    fn apply_delta(&mut self, translation: &Vector3<f64>, rotation: &Vector3<f64>) {
        let t = *translation;
        match self.robot.attached.clone() {
            Some(Attachment::Part { object, part }) => self.drag_joint(&object, &part, &t),
            other => {
                let rot = self.robot.ee_pose.rotation
                    * UnitQuaternion::from_scaled_axis(*rotation);
                let pos =
                    self.robot.ee_pose.translation.vector + self.robot.ee_pose.rotation * t;
                self.robot.ee_pose = Isometry3::from_parts(Translation3::from(pos), rot);
                if let Some(Attachment::Rigid { body, grasp_offset }) = other {
                    if let Some(b) = self.rigid.iter_mut().find(|b| b.id == body) {
                        b.pose = self.robot.ee_pose * grasp_offset;
                    }
                }
            }
        }
    }

    /// Projects a body-frame translation onto the 1-DoF constraint manifold of
    /// the held part's joint, scales by (1 - friction), clamps to the limits,
    /// and snaps the ee back onto the handle frame.
    fn drag_joint(&mut self, object_id: &str, part_id: &str, t_body: &Vector3<f64>) {
        let Some(oi) = self.objects.iter().position(|o| o.id == object_id) else {
            return;
        };
        let Some(pi) = self.objects[oi].part_index(part_id) else {
            return;
        };
        let Some(ji) = self.objects[oi].parts[pi].joint_index else {
            return; // handle on a static part: the world does not move
        };
        let obj = &self.objects[oi];
        let Some(handle) = obj.handle_world(pi) else {
            return;
        };
        // While attached the ee frame coincides with the handle frame.
        let delta_world = handle.rotation * t_body;
        let (line_point, axis) = obj.joint_world_line(ji);
        let joint = &obj.joints[ji];
        let dv = match joint.kind {
            JointKind::Prismatic => delta_world.dot(&axis),
            JointKind::Revolute => {
                let rel = handle.translation.vector - line_point.coords;
                let radial = rel - axis.into_inner() * rel.dot(&axis);
                let r = radial.norm();
                if r < 1e-9 {
                    0.0
                } else {
                    let tangent = axis.cross(&(radial / r));
                    delta_world.dot(&tangent) / r
                }
            }
        };
        let dv = dv * (1.0 - joint.friction);
        let joint = &mut self.objects[oi].joints[ji];
        joint.value = (joint.value + dv).clamp(joint.lo, joint.hi);
        self.robot.ee_pose = self.objects[oi]
            .handle_world(pi)
            .expect("handle persists across the step");
    }

    /// Attaches to the nearest grasp target within tolerance: articulated
    /// handles need position and orientation agreement, rigid bodies position
    /// only. Scan order (articulated objects, then rigid bodies) breaks ties.
    fn try_attach(&mut self) {
        let ee = self.robot.ee_pose;
        let mut best: Option<(f64, Attachment)> = None;
        for obj in &self.objects {
            for (pi, _) in obj.parts.iter().enumerate() {
                let Some(handle) = obj.handle_world(pi) else {
                    continue;
                };
                let d = (handle.translation.vector - ee.translation.vector).norm();
                if d > self.cfg.attach_pos_tol {
                    continue;
                }
                if rotation_angle_between(&handle.rotation, &ee.rotation)
                    > self.cfg.attach_rot_tol
                {
                    continue;
                }
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((
                        d,
                        Attachment::Part {
                            object: obj.id.clone(),
                            part: obj.parts[pi].id.clone(),
                        },
                    ));
                }
            }
        }
        for body in &self.rigid {
            if !body.graspable {
                continue;
            }
            let d = (body.pose.translation.vector - ee.translation.vector).norm();
            if d > self.cfg.attach_pos_tol {
                continue;
            }
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((
                    d,
                    Attachment::Rigid {
                        body: body.id.clone(),
                        grasp_offset: ee.inverse() * body.pose,
                    },
                ));
            }
        }
        if let Some((_, attachment)) = best {
            if let Attachment::Part { object, part } = &attachment {
                // Snap the ee onto the handle frame.
                let obj = self.object(object).expect("attachment target exists");
                let pi = obj.part_index(part).expect("attachment target exists");
                self.robot.ee_pose = obj.handle_world(pi).expect("handle exists");
            }
            self.robot.attached = Some(attachment);
        }
    }

    /// Evaluates a success condition against the current state.
    pub fn evaluate(&self, condition: &SuccessCondition) -> Result<bool> {
        predicate::evaluate(self, condition)
    }
}

fn shape_from_doc(doc: &ShapeDoc) -> Shape {
    fn one(doc: &ShapeDoc, out: &mut Shape) {
        match doc {
            ShapeDoc::Box { half_extents, pose } => {
                let s = Shape::boxed(
                    Vector3::new(half_extents[0], half_extents[1], half_extents[2]),
                    pose_from_seven(pose),
                );
                out.primitives.extend(s.primitives);
            }
            ShapeDoc::Cylinder {
                radius,
                half_height,
                pose,
            } => {
                let s = Shape::cylinder(*radius, *half_height, pose_from_seven(pose));
                out.primitives.extend(s.primitives);
            }
            ShapeDoc::Composite { parts } => {
                for p in parts {
                    one(p, out);
                }
            }
        }
    }
    let mut shape = Shape {
        primitives: Vec::new(),
    };
    one(doc, &mut shape);
    shape
}

fn shape_to_doc(shape: &Shape) -> ShapeDoc {
    use crate::geom::shapes::PrimitiveKind;
    let prim_doc = |p: &crate::geom::shapes::Primitive| match p.kind {
        PrimitiveKind::Box { half_extents } => ShapeDoc::Box {
            half_extents,
            pose: pose_to_seven(&p.local_pose),
        },
        PrimitiveKind::Cylinder {
            radius,
            half_height,
        } => ShapeDoc::Cylinder {
            radius,
            half_height,
            pose: pose_to_seven(&p.local_pose),
        },
    };
    if shape.primitives.len() == 1 {
        prim_doc(&shape.primitives[0])
    } else {
        ShapeDoc::Composite {
            parts: shape.primitives.iter().map(prim_doc).collect(),
        }
    }
}
