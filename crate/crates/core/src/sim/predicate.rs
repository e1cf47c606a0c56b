//! Success conditions: pure predicates over scene state.

use serde::{Deserialize, Serialize};

use super::{Attachment, Scene};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessCondition {
    /// Joint value at or above `lo + frac * (hi - lo)`.
    JointAbove { object: String, joint: usize, frac: f64 },
    /// Joint value at or below `lo + frac * (hi - lo)`.
    JointBelow { object: String, joint: usize, frac: f64 },
    /// Gripper is carrying the given rigid body.
    Holding { body: String },
    /// Body center lies inside a region's box (in the region's frame).
    Inside { body: String, region: String },
    /// Every sub-condition holds.
    All { conditions: Vec<SuccessCondition> },
}

pub fn evaluate(scene: &Scene, condition: &SuccessCondition) -> Result<bool> {
    match condition {
        SuccessCondition::JointAbove {
            object,
            joint,
            frac,
        } => {
            let j = lookup_joint(scene, object, *joint)?;
            Ok(j.value >= j.lo + frac * (j.hi - j.lo))
        }
        SuccessCondition::JointBelow {
            object,
            joint,
            frac,
        } => {
            let j = lookup_joint(scene, object, *joint)?;
            Ok(j.value <= j.lo + frac * (j.hi - j.lo))
        }
        SuccessCondition::Holding { body } => {
            scene.body(body)?;
            Ok(matches!(
                &scene.robot.attached,
                Some(Attachment::Rigid { body: held, .. }) if held == body
            ))
        }
        SuccessCondition::Inside { body, region } => {
            let b = scene.body(body)?;
            let r = scene.region(region)?;
            let frame = scene.region_frame(r)?;
            let local = frame.inverse_transform_point(&nalgebra::Point3::from(
                b.pose.translation.vector,
            ));
            Ok(r.aabb.contains(&local))
        }
        SuccessCondition::All { conditions } => {
            for c in conditions {
                if !evaluate(scene, c)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

fn lookup_joint<'a>(
    scene: &'a Scene,
    object: &str,
    joint: usize,
) -> Result<&'a super::Joint> {
    let obj = scene.object(object)?;
    obj.joints
        .get(joint)
        .ok_or_else(|| Error::UnknownId(format!("{object}.joints[{joint}]")))
}
