//! Keyframed pick-and-place planning: approach–grasp–lift(–transport–place)
//! –retreat waypoints with swept gripper collision checks over every
//! straight-line segment.

use nalgebra::{Isometry3, Point3, Translation3};

use super::grasp::{gripper_collides, GraspCandidate};
use crate::config::GraspConfig;
use crate::error::{Error, Result};
use crate::geom::{interpolate_pose, Pose};
use crate::sim::{Action, GripperCmd, Scene};

/// Semantic tag of a keyframe within the pick-and-place arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Approach,
    Grasp,
    Lift,
    Transport,
    Place,
    Retreat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub pose: Pose,
    pub gripper: GripperCmd,
    pub phase: Phase,
}

/// Ordered waypoints; execution interpolates straight lines between them and
/// applies the gripper command on arrival at each waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeTrajectory {
    pub frames: Vec<Keyframe>,
}

/// Plans the keyframe arc for a selected grasp: pre-grasp offset back along
/// the approach axis, grasp (close), vertical lift, and — when a goal region
/// is given — transport above the region, place inside it (open), and
/// retreat. Every segment, starting from the current end-effector pose, is
/// swept for gripper collisions at `cfg.sweep_resolution`; if the direct plan
/// collides, a vertical-lift-first variant routes all lateral motion at a
/// transit altitude above the scene. Fails when both variants collide.
pub fn plan_keyframes(
    scene: &Scene,
    grasp: &GraspCandidate,
    target_body: &str,
    goal_region: Option<&str>,
    cfg: &GraspConfig,
) -> Result<KeyframeTrajectory> {
    let goal_center = match goal_region {
        None => None,
        Some(id) => {
            let region = scene.region(id)?;
            let frame = scene.region_frame(region)?;
            Some(frame.transform_point(&region.aabb.center()))
        }
    };

    let direct = build_keyframes(scene, grasp, goal_center.as_ref(), cfg, false);
    if !trajectory_collides(scene, &direct, target_body, cfg) {
        return Ok(direct);
    }
    let lifted = build_keyframes(scene, grasp, goal_center.as_ref(), cfg, true);
    if !trajectory_collides(scene, &lifted, target_body, cfg) {
        return Ok(lifted);
    }
    Err(Error::Planning(
        "no collision-free keyframe variant for the selected grasp".into(),
    ))
}

fn build_keyframes(
    scene: &Scene,
    grasp: &GraspCandidate,
    goal_center: Option<&Point3<f64>>,
    cfg: &GraspConfig,
    vertical_first: bool,
) -> KeyframeTrajectory {
    let raise = |pose: &Pose, dz: f64| {
        let mut t = pose.translation.vector;
        t.z += dz;
        Isometry3::from_parts(Translation3::from(t), pose.rotation)
    };
    let at_z = |pose: &Pose, z: f64| {
        let mut t = pose.translation.vector;
        t.z = z;
        Isometry3::from_parts(Translation3::from(t), pose.rotation)
    };

    let pre = grasp.pose * Isometry3::translation(0.0, 0.0, -cfg.approach_offset);
    let lift = raise(&grasp.pose, cfg.lift_height);
    let mut frames = Vec::new();

    if vertical_first {
        // Route every lateral move at a transit altitude above the arc.
        let mut transit = scene
            .robot
            .ee_pose
            .translation
            .vector
            .z
            .max(pre.translation.vector.z)
            .max(lift.translation.vector.z);
        if let Some(c) = goal_center {
            transit = transit.max(c.z);
        }
        let transit = transit + cfg.lift_height;
        let start = scene.robot.ee_pose;
        frames.push(Keyframe {
            pose: Isometry3::from_parts(
                Translation3::new(
                    start.translation.vector.x,
                    start.translation.vector.y,
                    transit,
                ),
                grasp.pose.rotation,
            ),
            gripper: GripperCmd::Open,
            phase: Phase::Approach,
        });
        frames.push(Keyframe {
            pose: at_z(&pre, transit),
            gripper: GripperCmd::Open,
            phase: Phase::Approach,
        });
    }

    frames.push(Keyframe {
        pose: pre,
        gripper: GripperCmd::Open,
        phase: Phase::Approach,
    });
    frames.push(Keyframe {
        pose: grasp.pose,
        gripper: GripperCmd::Close,
        phase: Phase::Grasp,
    });
    frames.push(Keyframe {
        pose: lift,
        gripper: GripperCmd::Hold,
        phase: Phase::Lift,
    });

    match goal_center {
        None => frames.push(Keyframe {
            pose: raise(&lift, cfg.approach_offset),
            gripper: GripperCmd::Hold,
            phase: Phase::Retreat,
        }),
        Some(center) => {
            let place = Isometry3::from_parts(Translation3::from(center.coords), grasp.pose.rotation);
            let transport_z = if vertical_first {
                lift.translation.vector.z.max(center.z) + cfg.lift_height
            } else {
                lift.translation.vector.z.max(center.z + cfg.lift_height)
            };
            if vertical_first {
                frames.push(Keyframe {
                    pose: at_z(&lift, transport_z),
                    gripper: GripperCmd::Hold,
                    phase: Phase::Lift,
                });
            }
            frames.push(Keyframe {
                pose: at_z(&place, transport_z),
                gripper: GripperCmd::Hold,
                phase: Phase::Transport,
            });
            frames.push(Keyframe {
                pose: place,
                gripper: GripperCmd::Open,
                phase: Phase::Place,
            });
            frames.push(Keyframe {
                pose: at_z(&place, transport_z),
                gripper: GripperCmd::Hold,
                phase: Phase::Retreat,
            });
        }
    }

    KeyframeTrajectory { frames }
}

/// Sweeps the gripper volume along every segment of the trajectory (from the
/// current end-effector pose through each waypoint) and reports any
/// intersection with non-target shapes.
fn trajectory_collides(
    scene: &Scene,
    traj: &KeyframeTrajectory,
    target_body: &str,
    cfg: &GraspConfig,
) -> bool {
    let mut from = scene.robot.ee_pose;
    for frame in &traj.frames {
        if segment_collides(scene, &from, &frame.pose, target_body, cfg) {
            return true;
        }
        from = frame.pose;
    }
    false
}

fn segment_collides(
    scene: &Scene,
    a: &Pose,
    b: &Pose,
    target_body: &str,
    cfg: &GraspConfig,
) -> bool {
    let dist = (b.translation.vector - a.translation.vector).norm();
    let samples = ((dist / cfg.sweep_resolution).ceil() as usize).max(1);
    (0..=samples).any(|k| {
        let pose = interpolate_pose(a, b, k as f64 / samples as f64);
        gripper_collides(scene, &pose, target_body, cfg)
    })
}

/// Executes a keyframe trajectory in the simulator: each straight-line
/// segment is split into steps no longer than `max_step`, and the waypoint's
/// gripper command is applied on arrival. Returns the number of sim steps.
pub fn execute_keyframes(scene: &mut Scene, traj: &KeyframeTrajectory) -> usize {
    let mut steps = 0;
    for frame in &traj.frames {
        let from = scene.robot.ee_pose;
        let dist = (frame.pose.translation.vector - from.translation.vector).norm();
        let n = ((dist / scene.cfg.max_step).ceil() as usize).max(1);
        for k in 1..=n {
            let pose = interpolate_pose(&from, &frame.pose, k as f64 / n as f64);
            scene.step(&Action::absolute(pose));
            steps += 1;
        }
        match frame.gripper {
            GripperCmd::Hold => {}
            GripperCmd::Open => {
                scene.step(&Action::open());
                steps += 1;
            }
            GripperCmd::Close => {
                scene.step(&Action::close());
                steps += 1;
            }
        }
    }
    steps
}
