//! On-disk scene documents (`.scene` files). JSON with a strict schema:
//! unknown fields are rejected, parse errors carry the path of the offending
//! field, and validation enforces the kinematic invariants before a runtime
//! scene is constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;

pub const IDENTITY_POSE: [f64; 7] = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];

fn identity_pose() -> [f64; 7] {
    IDENTITY_POSE
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SceneDoc {
    pub cameras: Vec<CameraDoc>,
    pub articulated: Vec<ArticulatedDoc>,
    pub rigid: Vec<RigidDoc>,
    pub regions: Vec<RegionDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub id: String,
    /// `[x, y, z, qw, qx, qy, qz]`, camera-to-world; +z looks into the scene.
    pub pose: [f64; 7],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum JointKindDoc {
    Prismatic,
    Revolute,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JointDoc {
    pub kind: JointKindDoc,
    /// Unit axis in the joint frame.
    pub axis: [f64; 3],
    /// Joint frame in the object base frame.
    #[serde(default = "identity_pose")]
    pub origin: [f64; 7],
    pub lo: f64,
    pub hi: f64,
    /// Initial value; defaults to `lo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<f64>,
    /// Resistance in [0, 1): fraction of commanded motion lost to drag.
    #[serde(default)]
    pub friction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartDoc {
    pub part_id: String,
    pub shape: ShapeDoc,
    /// Index into the object's joint list; absent for static parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_index: Option<usize>,
    /// Handle frame in the part frame; grasp target for the gripper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_pose: Option<[f64; 7]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArticulatedDoc {
    pub id: String,
    pub category: String,
    #[serde(default = "identity_pose")]
    pub base_pose: [f64; 7],
    pub joints: Vec<JointDoc>,
    pub parts: Vec<PartDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RigidDoc {
    pub id: String,
    pub shape: ShapeDoc,
    pub pose: [f64; 7],
    #[serde(default)]
    pub graspable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionDoc {
    pub id: String,
    /// Part the region is rigidly attached to; absent → world frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached_to: Option<PartRefDoc>,
    pub aabb: Aabb,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartRefDoc {
    pub object: String,
    pub part: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDoc {
    Box {
        half_extents: [f64; 3],
        #[serde(default = "identity_pose")]
        pose: [f64; 7],
    },
    Cylinder {
        radius: f64,
        half_height: f64,
        #[serde(default = "identity_pose")]
        pose: [f64; 7],
    },
    Composite {
        parts: Vec<ShapeDoc>,
    },
}

impl SceneDoc {
    /// Parses and validates a scene document. Errors name the failing field.
    pub fn parse(text: &str) -> Result<SceneDoc> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SceneDoc = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene doc serialization")
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<&str> = Vec::new();

        for (i, cam) in self.cameras.iter().enumerate() {
            let path = format!("cameras[{i}]");
            check_pose(&cam.pose, &format!("{path}.pose"))?;
            if cam.fx <= 0.0 || cam.fy <= 0.0 {
                return Err(Error::parse(format!("{path}.fx"), "focal lengths must be positive"));
            }
            if cam.width == 0 || cam.height == 0 {
                return Err(Error::parse(format!("{path}.width"), "resolution must be nonzero"));
            }
            claim_id(&mut ids, &cam.id, format!("{path}.id"))?;
        }

        for (i, obj) in self.articulated.iter().enumerate() {
            let path = format!("articulated[{i}]");
            check_pose(&obj.base_pose, &format!("{path}.base_pose"))?;
            claim_id(&mut ids, &obj.id, format!("{path}.id"))?;

            for (j, joint) in obj.joints.iter().enumerate() {
                let jp = format!("{path}.joints[{j}]");
                let n = (joint.axis[0].powi(2) + joint.axis[1].powi(2) + joint.axis[2].powi(2))
                    .sqrt();
                if (n - 1.0).abs() > 1e-6 {
                    return Err(Error::parse(format!("{jp}.axis"), "axis not unit"));
                }
                check_pose(&joint.origin, &format!("{jp}.origin"))?;
                if !(joint.lo <= joint.hi) {
                    return Err(Error::parse(format!("{jp}.lo"), "limits must satisfy lo <= hi"));
                }
                if let Some(init) = joint.init {
                    if init < joint.lo || init > joint.hi {
                        return Err(Error::parse(format!("{jp}.init"), "init outside [lo, hi]"));
                    }
                }
                if !(0.0..1.0).contains(&joint.friction) {
                    return Err(Error::parse(format!("{jp}.friction"), "friction must be in [0, 1)"));
                }
            }

            let mut part_ids: Vec<&str> = Vec::new();
            for (p, part) in obj.parts.iter().enumerate() {
                let pp = format!("{path}.parts[{p}]");
                if part_ids.contains(&part.part_id.as_str()) {
                    return Err(Error::parse(
                        format!("{pp}.part_id"),
                        format!("duplicate part id `{}`", part.part_id),
                    ));
                }
                part_ids.push(&part.part_id);
                if let Some(j) = part.joint_index {
                    if j >= obj.joints.len() {
                        return Err(Error::parse(
                            format!("{pp}.joint_index"),
                            format!("joint index {j} out of range ({} joints)", obj.joints.len()),
                        ));
                    }
                }
                if let Some(h) = &part.handle_pose {
                    check_pose(h, &format!("{pp}.handle_pose"))?;
                }
                check_shape(&part.shape, &format!("{pp}.shape"))?;
            }
        }

        for (i, body) in self.rigid.iter().enumerate() {
            let path = format!("rigid[{i}]");
            check_pose(&body.pose, &format!("{path}.pose"))?;
            check_shape(&body.shape, &format!("{path}.shape"))?;
            claim_id(&mut ids, &body.id, format!("{path}.id"))?;
        }

        for (i, region) in self.regions.iter().enumerate() {
            let path = format!("regions[{i}]");
            claim_id(&mut ids, &region.id, format!("{path}.id"))?;
            for k in 0..3 {
                if region.aabb.min[k] > region.aabb.max[k] {
                    return Err(Error::parse(format!("{path}.aabb"), "min exceeds max"));
                }
            }
            if let Some(part_ref) = &region.attached_to {
                let obj = self
                    .articulated
                    .iter()
                    .find(|o| o.id == part_ref.object)
                    .ok_or_else(|| {
                        Error::parse(
                            format!("{path}.attached_to.object"),
                            format!("unknown object `{}`", part_ref.object),
                        )
                    })?;
                if !obj.parts.iter().any(|p| p.part_id == part_ref.part) {
                    return Err(Error::parse(
                        format!("{path}.attached_to.part"),
                        format!("unknown part `{}`", part_ref.part),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn claim_id<'a>(ids: &mut Vec<&'a str>, value: &'a str, path: String) -> Result<()> {
    if value.is_empty() {
        return Err(Error::parse(path, "empty id"));
    }
    if ids.contains(&value) {
        return Err(Error::parse(path, format!("duplicate id `{value}`")));
    }
    ids.push(value);
    Ok(())
}

fn check_pose(pose: &[f64; 7], path: &str) -> Result<()> {
    if pose.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(path, "non-finite pose component"));
    }
    let qn = (pose[3].powi(2) + pose[4].powi(2) + pose[5].powi(2) + pose[6].powi(2)).sqrt();
    if (qn - 1.0).abs() > 1e-6 {
        return Err(Error::parse(path, "quaternion not unit"));
    }
    Ok(())
}

fn check_shape(shape: &ShapeDoc, path: &str) -> Result<()> {
    match shape {
        ShapeDoc::Box { half_extents, pose } => {
            if half_extents.iter().any(|&h| h <= 0.0) {
                return Err(Error::parse(
                    format!("{path}.half_extents"),
                    "half extents must be positive",
                ));
            }
            check_pose(pose, &format!("{path}.pose"))
        }
        ShapeDoc::Cylinder {
            radius,
            half_height,
            pose,
        } => {
            if *radius <= 0.0 || *half_height <= 0.0 {
                return Err(Error::parse(
                    format!("{path}.radius"),
                    "cylinder dimensions must be positive",
                ));
            }
            check_pose(pose, &format!("{path}.pose"))
        }
        ShapeDoc::Composite { parts } => {
            if parts.is_empty() {
                return Err(Error::parse(format!("{path}.parts"), "empty composite"));
            }
            for (i, part) in parts.iter().enumerate() {
                if matches!(part, ShapeDoc::Composite { .. }) {
                    return Err(Error::parse(
                        format!("{path}.parts[{i}]"),
                        "nested composites are not allowed",
                    ));
                }
                check_shape(part, &format!("{path}.parts[{i}]"))?;
            }
            Ok(())
        }
    }
}
