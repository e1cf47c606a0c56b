//! Ray-cast rendering: per-camera depth and label images against the analytic
//! primitives, plus a fused labeled point cloud with per-point normals.

use nalgebra::{Point3, Vector3};

use super::{Camera, RobotState, Scene};
use crate::geom::shapes::ray_cast_shape;

/// Stable mapping from label index (1-based; 0 = background) to scene entity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub entries: Vec<LabelEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    /// `object/part` for articulated parts, the body id for rigid bodies.
    pub name: String,
    pub target: LabelTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelTarget {
    Part { object: String, part: String },
    Body { body: String },
}

impl LabelTable {
    /// Builds the table in instance order: articulated parts (object order,
    /// then part order), then rigid bodies.
    pub fn from_scene(scene: &Scene) -> LabelTable {
        let mut entries = Vec::new();
        for obj in &scene.objects {
            for part in &obj.parts {
                entries.push(LabelEntry {
                    name: format!("{}/{}", obj.id, part.id),
                    target: LabelTarget::Part {
                        object: obj.id.clone(),
                        part: part.id.clone(),
                    },
                });
            }
        }
        for body in &scene.rigid {
            entries.push(LabelEntry {
                name: body.id.clone(),
                target: LabelTarget::Body {
                    body: body.id.clone(),
                },
            });
        }
        LabelTable { entries }
    }

    pub fn name_of(&self, label: u32) -> Option<&str> {
        if label == 0 {
            return None;
        }
        self.entries.get(label as usize - 1).map(|e| e.name.as_str())
    }

    pub fn target_of(&self, label: u32) -> Option<&LabelTarget> {
        if label == 0 {
            return None;
        }
        self.entries.get(label as usize - 1).map(|e| &e.target)
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(|i| i as u32 + 1)
    }

    /// Label of the first part driven by the given joint of an object.
    pub fn label_for_joint(&self, scene: &Scene, object: &str, joint: usize) -> Option<u32> {
        let obj = scene.objects.iter().find(|o| o.id == object)?;
        let pi = obj.part_for_joint(joint)?;
        self.index_of(&format!("{}/{}", object, obj.parts[pi].id))
    }
}

/// One camera's render: row-major `v * width + u` indexing.
#[derive(Debug, Clone)]
pub struct CameraFrame {
    pub camera_id: String,
    pub width: usize,
    pub height: usize,
    /// z-depth in meters; 0 = no hit.
    pub depth: Vec<f64>,
    /// Label-table index; 0 = background.
    pub label: Vec<u32>,
    /// Outward world-frame surface normal at the hit; zero when no hit.
    pub normal: Vec<Vector3<f64>>,
}

impl CameraFrame {
    pub fn pixel(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[self.pixel(u, v)]
    }

    pub fn label_at(&self, u: usize, v: usize) -> u32 {
        self.label[self.pixel(u, v)]
    }
}

/// Fused multi-view cloud. Parallel arrays, one entry per valid depth pixel.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub labels: Vec<u32>,
    /// (camera index, pixel index) each point came from.
    pub sources: Vec<(u32, u32)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of points carrying the given label.
    pub fn indices_with_label(&self, label: u32) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sources: indices.iter().map(|&i| self.sources[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub frames: Vec<CameraFrame>,
    /// Sensor models the frames were rendered with, in frame order, so
    /// consumers can back-project without holding the scene.
    pub cameras: Vec<Camera>,
    pub cloud: PointCloud,
    pub labels: LabelTable,
    pub robot: RobotState,
    /// Scene step count at render time.
    pub timestamp: usize,
}

impl Observation {
    /// Frame index for a camera id.
    pub fn frame_index(&self, camera_id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.camera_id == camera_id)
    }
}

/// Renders every camera and fuses the back-projected pixels into one labeled
/// cloud. Deterministic: pixel order is camera-major, row-major.
pub fn render_observation(scene: &Scene) -> Observation {
    let labels = LabelTable::from_scene(scene);
    let instances = scene.instances();
    let mut frames = Vec::with_capacity(scene.cameras.len());
    let mut cloud = PointCloud::default();

    for (ci, cam) in scene.cameras.iter().enumerate() {
        let mut frame = CameraFrame {
            camera_id: cam.id.clone(),
            width: cam.width,
            height: cam.height,
            depth: vec![0.0; cam.width * cam.height],
            label: vec![0; cam.width * cam.height],
            normal: vec![Vector3::zeros(); cam.width * cam.height],
        };
        for v in 0..cam.height {
            for u in 0..cam.width {
                let (origin, dir) = cam.ray(u, v);
                let mut best_t = f64::INFINITY;
                let mut best_label = 0u32;
                let mut best_normal = Vector3::zeros();
                for inst in &instances {
                    if let Some(hit) = ray_cast_shape(inst.shape, &inst.pose, &origin, &dir) {
                        if hit.t > 1e-9 && hit.t < best_t {
                            best_t = hit.t;
                            best_label = inst.label;
                            best_normal = hit.normal;
                        }
                    }
                }
                if best_label != 0 {
                    let idx = frame.pixel(u, v);
                    frame.depth[idx] = best_t;
                    frame.label[idx] = best_label;
                    frame.normal[idx] = best_normal;
                    cloud.points.push(origin + dir * best_t);
                    cloud.normals.push(best_normal);
                    cloud.labels.push(best_label);
                    cloud.sources.push((ci as u32, idx as u32));
                }
            }
        }
        frames.push(frame);
    }

    Observation {
        frames,
        cameras: scene.cameras.clone(),
        cloud,
        labels,
        robot: scene.robot.clone(),
        timestamp: scene.steps,
    }
}
