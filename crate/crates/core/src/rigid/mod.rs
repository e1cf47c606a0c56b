//! Rigid-object manipulation branch: antipodal grasp synthesis over labeled
//! point clouds, region and collision filtering, argmax selection, and
//! keyframed pick-and-place planning with swept collision checks.

pub mod grasp;
pub mod keyframe;

pub use grasp::{
    filter_by_region, generate_candidates, gripper_collides, gripper_volume, prune_collisions,
    select_grasp, GraspCandidate, PixelBox, MIN_TARGET_POINTS,
};
pub use keyframe::{execute_keyframes, plan_keyframes, Keyframe, KeyframeTrajectory, Phase};
