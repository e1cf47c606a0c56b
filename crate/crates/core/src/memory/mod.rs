//! Affordance memory: verified manipulation episodes bucketed by articulation
//! type, retrieved by cosine similarity over geometric embeddings, and grown
//! by appending new verified episodes at run time.

pub mod embed;
mod persist;

use nalgebra::Point3;

use crate::config::MemoryConfig;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::sim::JointKind;

pub use embed::{cosine, Embedding, EmbeddingProvider, GeometricEmbedding, PartPatch, EMBED_DIM};

/// What a successful episode teaches: where to grab and how to move.
#[derive(Debug, Clone, PartialEq)]
pub struct Affordance {
    /// Contact point (m, world frame at episode start).
    pub contact: Point3<f64>,
    /// Post-contact ee trajectory, arc-length resampled to a fixed waypoint
    /// count.
    pub trajectory: Vec<Pose>,
}

impl Affordance {
    pub fn validate(&self, expected_len: usize) -> Result<()> {
        if self.trajectory.is_empty() {
            return Err(Error::Memory("empty trajectory".into()));
        }
        if self.trajectory.len() != expected_len {
            return Err(Error::Memory(format!(
                "trajectory has {} waypoints, expected {expected_len}",
                self.trajectory.len()
            )));
        }
        let d = (self.trajectory[0].translation.vector - self.contact.coords).norm();
        if d > 0.02 {
            return Err(Error::Memory(format!(
                "first waypoint {d:.4} m from contact (limit 0.02)"
            )));
        }
        Ok(())
    }
}

/// Arc-length resample a waypoint sequence to exactly `n` poses (positions
/// interpolated linearly, orientations by slerp). Zero-length trajectories
/// repeat their first pose.
pub fn resample_waypoints(traj: &[Pose], n: usize) -> Vec<Pose> {
    assert!(n >= 1, "resample target must be positive");
    if traj.is_empty() {
        return Vec::new();
    }
    if traj.len() == 1 {
        return vec![traj[0]; n];
    }
    let mut cum = vec![0.0];
    for w in traj.windows(2) {
        let d = (w[1].translation.vector - w[0].translation.vector).norm();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if total < 1e-12 {
        return vec![traj[0]; n];
    }
    (0..n)
        .map(|i| {
            let target = total * i as f64 / (n - 1) as f64;
            let mut seg = 0;
            while seg + 2 < cum.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let t = if span > 1e-12 {
                (target - cum[seg]) / span
            } else {
                0.0
            };
            crate::geom::interpolate_pose(&traj[seg], &traj[seg + 1], t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRef {
    pub category: String,
    pub object_id: String,
    pub part_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub task: String,
    pub variation: String,
    pub object: ObjectRef,
    pub kind: JointKind,
    pub affordance: Affordance,
    /// Target-part point patch at episode start (the image-crop surrogate).
    pub patch: PartPatch,
    /// Full part cloud at episode start, fused across views.
    pub cloud: PartPatch,
    pub embedding: Embedding,
}

impl MemoryEntry {
    fn validate(&self, traj_len: usize) -> Result<()> {
        self.affordance.validate(traj_len)?;
        let n: f64 = self
            .embedding
            .iter()
            .map(|v| (*v as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::Memory(format!("embedding norm {n} is not 1")));
        }
        Ok(())
    }
}

/// The bank: one append-only bucket per articulation type.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    prismatic: Vec<MemoryEntry>,
    revolute: Vec<MemoryEntry>,
    cfg: MemoryConfig,
}

impl MemoryBank {
    pub fn new(cfg: &MemoryConfig) -> MemoryBank {
        MemoryBank {
            prismatic: Vec::new(),
            revolute: Vec::new(),
            cfg: cfg.clone(),
        }
    }

    pub fn bucket(&self, kind: JointKind) -> &[MemoryEntry] {
        match kind {
            JointKind::Prismatic => &self.prismatic,
            JointKind::Revolute => &self.revolute,
        }
    }

    pub fn len(&self) -> usize {
        self.prismatic.len() + self.revolute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a verified episode to its bucket. Duplicates are allowed
    /// unless the config enables similarity dedup. Returns whether the entry
    /// was stored.
    pub fn insert(&mut self, entry: MemoryEntry) -> Result<bool> {
        entry.validate(self.cfg.traj_waypoints)?;
        if let Some(threshold) = self.cfg.dedup_threshold {
            let near = self
                .bucket(entry.kind)
                .iter()
                .any(|e| cosine(&e.embedding, &entry.embedding) >= threshold as f64);
            if near {
                return Ok(false);
            }
        }
        match entry.kind {
            JointKind::Prismatic => self.prismatic.push(entry),
            JointKind::Revolute => self.revolute.push(entry),
        }
        Ok(true)
    }

    /// Inserts into an explicit bucket, rejecting kind mismatches.
    pub fn insert_into(&mut self, kind: JointKind, entry: MemoryEntry) -> Result<bool> {
        if entry.kind != kind {
            return Err(Error::Memory(format!(
                "entry kind {:?} does not match bucket {kind:?}",
                entry.kind
            )));
        }
        self.insert(entry)
    }

    /// Most similar entry in a bucket by cosine; ties go to the earliest
    /// inserted. Errors on an empty bucket (callers fall back to a heuristic).
    pub fn retrieve(&self, query: &Embedding, kind: JointKind) -> Result<(&MemoryEntry, f64)> {
        let bucket = self.bucket(kind);
        if bucket.is_empty() {
            return Err(Error::Memory(format!("retrieval miss: {kind:?} bucket is empty")));
        }
        let mut best = 0usize;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, e) in bucket.iter().enumerate() {
            let s = cosine(query, &e.embedding);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        Ok((&bucket[best], best_sim))
    }

    /// Retrieval when the joint kind is unknown: tries both buckets and takes
    /// the higher similarity (enabled by config).
    pub fn retrieve_any(&self, query: &Embedding) -> Result<(&MemoryEntry, f64, JointKind)> {
        let p = self.retrieve(query, JointKind::Prismatic).ok();
        let r = self.retrieve(query, JointKind::Revolute).ok();
        match (p, r) {
            (None, None) => Err(Error::Memory("retrieval miss: bank is empty".into())),
            (Some((e, s)), None) => Ok((e, s, JointKind::Prismatic)),
            (None, Some((e, s))) => Ok((e, s, JointKind::Revolute)),
            (Some((pe, ps)), Some((re, rs))) => {
                if ps >= rs {
                    Ok((pe, ps, JointKind::Prismatic))
                } else {
                    Ok((re, rs, JointKind::Revolute))
                }
            }
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.cfg
    }

    pub fn persist(&self, dir: &std::path::Path) -> Result<()> {
        persist::persist(self, dir)
    }

    pub fn load(dir: &std::path::Path, cfg: &MemoryConfig) -> Result<MemoryBank> {
        persist::load(dir, cfg)
    }
}
