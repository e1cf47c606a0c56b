//! Part-level affordance transfer: given a stored demonstration on one object
//! instance, find the corresponding contact on a new instance by dense
//! descriptor matching inside the segmented part, align the two part clouds
//! with RANSAC-initialized ICP, and re-target the demonstrated trajectory with
//! a local contact-displacement correction.

pub mod descriptor;
pub mod register;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;

use crate::config::TransferConfig;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::memory::{Affordance, MemoryEntry, PartPatch};
use crate::sim::render::{CameraFrame, Observation};
use crate::sim::Camera;

pub use descriptor::{descriptor_at, DescriptorProvider, GeometricDescriptor, DESC_DIM};
pub use register::{
    kabsch, register_parts, Registration, RegistrationDiagnostics, RigidTransform,
};

/// Distance the straight-pull fallback travels along the part normal when no
/// demonstration is available (meters).
pub const STRAIGHT_PULL_LENGTH: f64 = 0.30;

/// Pixels of one camera view that belong to one part, in row-major order.
#[derive(Debug, Clone)]
pub struct PartMask {
    pub camera: String,
    /// Label-table name, `object/part`.
    pub part: String,
    pub pixels: Vec<(u32, u32)>,
}

impl PartMask {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }
}

/// Produces part masks for a view. The default implementation reads the
/// renderer's label image; learned segmenters can slot in behind this.
pub trait SegmentationProvider {
    fn segment(
        &self,
        obs: &Observation,
        camera: &str,
        object: &str,
        part: &str,
    ) -> Result<PartMask>;
}

/// Ground-truth segmentation from the label image.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelSegmentation;

impl SegmentationProvider for LabelSegmentation {
    fn segment(
        &self,
        obs: &Observation,
        camera: &str,
        object: &str,
        part: &str,
    ) -> Result<PartMask> {
        let name = format!("{object}/{part}");
        let fi = obs
            .frame_index(camera)
            .ok_or_else(|| Error::UnknownId(camera.to_string()))?;
        let label = obs
            .labels
            .index_of(&name)
            .ok_or_else(|| Error::UnknownId(name.clone()))?;
        let frame = &obs.frames[fi];
        let mut pixels = Vec::new();
        for v in 0..frame.height {
            for u in 0..frame.width {
                if frame.label_at(u, v) == label {
                    pixels.push((u as u32, v as u32));
                }
            }
        }
        if pixels.is_empty() {
            return Err(Error::Segmentation(format!(
                "part `{name}` is not visible in camera `{camera}`"
            )));
        }
        Ok(PartMask {
            camera: camera.to_string(),
            part: name,
            pixels,
        })
    }
}

/// Segments a part in one view with the ground-truth provider.
pub fn segment_part(
    obs: &Observation,
    camera: &str,
    object: &str,
    part: &str,
) -> Result<PartMask> {
    LabelSegmentation.segment(obs, camera, object, part)
}

/// World point of one pixel. Errors on missing depth.
pub fn backproject(camera: &Camera, frame: &CameraFrame, u: u32, v: u32) -> Result<Point3<f64>> {
    let depth = frame.depth_at(u as usize, v as usize);
    if depth <= 0.0 {
        return Err(Error::Match(format!("pixel ({u}, {v}) has no depth")));
    }
    Ok(camera.back_project(u as usize, v as usize, depth))
}

/// Back-projects every mask pixel: world points and normals in mask order.
pub fn mask_geometry(
    obs: &Observation,
    mask: &PartMask,
) -> Result<(Vec<Point3<f64>>, Vec<Vector3<f64>>)> {
    let fi = obs
        .frame_index(&mask.camera)
        .ok_or_else(|| Error::UnknownId(mask.camera.clone()))?;
    let frame = &obs.frames[fi];
    let cam = &obs.cameras[fi];
    let mut points = Vec::with_capacity(mask.len());
    let mut normals = Vec::with_capacity(mask.len());
    for &(u, v) in &mask.pixels {
        points.push(backproject(cam, frame, u, v)?);
        normals.push(frame.normal[frame.pixel(u as usize, v as usize)]);
    }
    Ok((points, normals))
}

/// Finds the target-mask pixel whose descriptor is nearest the source
/// contact's descriptor. Ties resolve to the lowest row-major pixel.
pub fn match_contact(
    src: &PartPatch,
    contact_src: &Point3<f64>,
    obs: &Observation,
    mask: &PartMask,
) -> Result<(u32, u32)> {
    if mask.pixels.is_empty() {
        return Err(Error::Match("empty target mask".to_string()));
    }
    let provider = GeometricDescriptor;
    let (_, query) = descriptor_at(
        &src.points_f64(),
        &src.normals_f64(),
        contact_src,
        &provider,
    )
    .ok_or_else(|| Error::Match("empty source crop".to_string()))?;

    let (points, normals) = mask_geometry(obs, mask)?;
    let field = provider.field(&points, &normals);
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, f) in field.iter().enumerate() {
        let d2 = descriptor::descriptor_distance2(&query, f);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    Ok(mask.pixels[best])
}

/// Maps a demonstrated trajectory through a part-level registration.
///
/// Waypoints are normalized into the source local frame, pushed through the
/// resolved alignment, shifted by the contact-displacement correction
/// `δ = c_tgt_local − T(c_src_local)`, and denormalized via the target local
/// frame; orientations compose with the alignment rotation. Returns the
/// re-targeted waypoints and δ.
pub fn transfer_trajectory(
    affordance: &Affordance,
    reg: &Registration,
    contact_tgt: &Point3<f64>,
) -> (Vec<Pose>, Vector3<f64>) {
    let t = &reg.transform;
    let c_src_local = reg.src_frame.to_local(&affordance.contact);
    let c_tgt_local = reg.tgt_frame.to_local(contact_tgt);
    let delta = c_tgt_local.coords - t.apply(&c_src_local).coords;

    let src_basis_t = reg.src_frame.basis.transpose();
    let mut out = Vec::with_capacity(affordance.trajectory.len());
    for w in &affordance.trajectory {
        let p_local = reg.src_frame.to_local(&Point3::from(w.translation.vector));
        let p_mapped = Point3::from(t.apply(&p_local).coords + delta);
        let p_world = reg.tgt_frame.to_world(&p_mapped);

        let rot_local = src_basis_t * w.rotation.to_rotation_matrix().matrix();
        let rot_world = reg.tgt_frame.basis * t.rotation * rot_local;
        let q = UnitQuaternion::from_rotation_matrix(
            &nalgebra::Rotation3::from_matrix_unchecked(rot_world),
        );
        out.push(Pose::from_parts(
            nalgebra::Translation3::from(p_world.coords),
            q,
        ));
    }
    (out, delta)
}

/// How a transfer result was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Full pipeline: retrieved demonstration mapped through registration.
    Matched,
    /// Heuristic fallback used when the memory bank had nothing to offer.
    StraightPull,
}

/// Output of a part-level transfer: the grounded target contact, the resolved
/// alignment, the correction δ, and the re-targeted trajectory.
#[derive(Debug, Clone)]
pub struct TransferResult {
    pub contact: Point3<f64>,
    pub transform: RigidTransform,
    pub delta: Vector3<f64>,
    pub trajectory: Vec<Pose>,
    pub diagnostics: RegistrationDiagnostics,
    pub kind: TransferKind,
}

impl TransferResult {
    /// First waypoint must start at the contact (within 2 cm) and the
    /// alignment must be a proper rotation.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .trajectory
            .first()
            .ok_or_else(|| Error::Validation("transfer produced no waypoints".into()))?;
        let gap = (first.translation.vector - self.contact.coords).norm();
        if gap > 0.02 {
            return Err(Error::Validation(format!(
                "first waypoint is {gap:.4} m from the contact point"
            )));
        }
        if !self.transform.is_valid(1e-6) {
            return Err(Error::Validation("alignment is not a proper rotation".into()));
        }
        Ok(())
    }
}

/// Full part-level transfer of a retrieved demonstration onto the observed
/// target part: segment → match contact → back-project → register → re-target.
pub fn transfer(
    entry: &MemoryEntry,
    obs: &Observation,
    camera: &str,
    object: &str,
    part: &str,
    cfg: &TransferConfig,
    rng: &mut impl Rng,
) -> Result<TransferResult> {
    let mask = segment_part(obs, camera, object, part)?;
    let (u, v) = match_contact(&entry.cloud, &entry.affordance.contact, obs, &mask)?;
    let fi = obs.frame_index(camera).expect("camera checked by segment");
    let contact = backproject(&obs.cameras[fi], &obs.frames[fi], u, v)?;

    let (tgt_points, tgt_normals) = mask_geometry(obs, &mask)?;
    let reg = register_parts(
        &entry.cloud.points_f64(),
        &entry.cloud.normals_f64(),
        &tgt_points,
        &tgt_normals,
        cfg,
        rng,
    )?;
    let (trajectory, delta) = transfer_trajectory(&entry.affordance, &reg, &contact);

    let result = TransferResult {
        contact,
        transform: reg.transform,
        delta,
        trajectory,
        diagnostics: reg.diagnostics,
        kind: TransferKind::Matched,
    };
    result.validate()?;
    Ok(result)
}

/// Fallback when retrieval finds nothing: grab the central surface point of
/// the part and pull straight along its mean outward normal.
pub fn straight_pull(
    obs: &Observation,
    camera: &str,
    object: &str,
    part: &str,
    waypoints: usize,
) -> Result<TransferResult> {
    let mask = segment_part(obs, camera, object, part)?;
    let (points, normals) = mask_geometry(obs, &mask)?;

    let mut dir = Vector3::zeros();
    for n in &normals {
        dir += n;
    }
    if dir.norm() < 1e-9 {
        return Err(Error::Match(format!(
            "part `{}` has no dominant pull direction",
            mask.part
        )));
    }
    dir.normalize_mut();

    // Grip the frontmost protrusion rather than the face center: the points in
    // a thin band at the extreme of the pull direction are the handle or knob
    // if the part has one, and the front face itself if it does not.
    let front = points
        .iter()
        .map(|p| p.coords.dot(&dir))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut contact = Vector3::zeros();
    let mut band = 0usize;
    for p in &points {
        if p.coords.dot(&dir) >= front - 0.01 {
            contact += p.coords;
            band += 1;
        }
    }
    let contact = Point3::from(contact / band as f64);

    let n = waypoints.max(2);
    let trajectory: Vec<Pose> = (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            Pose::from_parts(
                nalgebra::Translation3::from(contact.coords + dir * (s * STRAIGHT_PULL_LENGTH)),
                UnitQuaternion::identity(),
            )
        })
        .collect();

    let result = TransferResult {
        contact,
        transform: RigidTransform::identity(),
        delta: Vector3::zeros(),
        trajectory,
        diagnostics: RegistrationDiagnostics {
            rms: 0.0,
            inlier_fraction: 0.0,
            low_confidence: true,
            icp_iterations: 0,
        },
        kind: TransferKind::StraightPull,
    };
    result.validate()?;
    Ok(result)
}
