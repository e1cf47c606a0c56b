//! Geometric part embedding: a 32-dim descriptor of a part's point patch,
//! built from shape statistics instead of a pretrained image encoder. It is
//! translation-invariant and deterministic, and lives behind
//! [`EmbeddingProvider`] so a learned embedder can drop in.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geom::pca::LocalFrame;

pub const EMBED_DIM: usize = 32;
pub type Embedding = [f32; EMBED_DIM];

/// Point patch of a part: positions and outward normals (the stored stand-in
/// for an image crop of the part).
#[derive(Debug, Clone, PartialEq)]
pub struct PartPatch {
    pub points: Vec<[f32; 3]>,
    pub normals: Vec<[f32; 3]>,
}

impl PartPatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points_f64(&self) -> Vec<Point3<f64>> {
        self.points
            .iter()
            .map(|p| Point3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect()
    }

    pub fn normals_f64(&self) -> Vec<Vector3<f64>> {
        self.normals
            .iter()
            .map(|n| Vector3::new(n[0] as f64, n[1] as f64, n[2] as f64))
            .collect()
    }
}

pub trait EmbeddingProvider {
    /// Embeds a part patch. `contact` is the grasp/handle point in the same
    /// frame as the patch; `category` is the object's category string.
    fn embed(&self, patch: &PartPatch, contact: &Point3<f64>, category: &str)
        -> Result<Embedding>;
}

/// Default provider: concatenates normalized PCA-frame extents (3),
/// eigenvalue ratios (2), a 9-bin normal-direction histogram, a 9-bin height
/// profile, the unit handle-offset direction (3), and a 6-way category hash,
/// then L2-normalizes.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeometricEmbedding;

impl EmbeddingProvider for GeometricEmbedding {
    fn embed(
        &self,
        patch: &PartPatch,
        contact: &Point3<f64>,
        category: &str,
    ) -> Result<Embedding> {
        if patch.len() < 10 {
            return Err(Error::Embedding(format!(
                "patch too small: {} points (need 10)",
                patch.len()
            )));
        }
        let points = patch.points_f64();
        let normals = patch.normals_f64();
        let frame = LocalFrame::fit(&points)
            .ok_or_else(|| Error::Embedding("empty patch".into()))?;
        if frame.rank(1e-10) < 2 {
            return Err(Error::Embedding("degenerate patch: rank < 2".into()));
        }

        let mut f = [0.0f64; EMBED_DIM];

        // Extents along the principal axes, normalized to a unit 3-vector.
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &points {
            let l = frame.to_local(p);
            for k in 0..3 {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(l[k]);
            }
        }
        let ext = Vector3::new(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
        let ext_n = ext.norm().max(1e-12);
        for k in 0..3 {
            f[k] = ext[k] / ext_n;
        }

        // Eigenvalue ratios (elongation / flatness).
        let l1 = frame.eigenvalues[0].max(1e-12);
        f[3] = frame.eigenvalues[1] / l1;
        f[4] = frame.eigenvalues[2] / l1;

        // Normal-direction histogram in the PCA frame: 3 elevation bands x
        // 3 azimuth sectors.
        let n_inv = 1.0 / normals.len().max(1) as f64;
        for n in &normals {
            let l = frame.dir_to_local(n);
            let band = if l.z > 1.0 / 3.0 {
                2
            } else if l.z < -1.0 / 3.0 {
                0
            } else {
                1
            };
            let az = l.y.atan2(l.x);
            let sector = if az < -std::f64::consts::FRAC_PI_3 {
                0
            } else if az < std::f64::consts::FRAC_PI_3 {
                1
            } else {
                2
            };
            f[5 + band * 3 + sector] += n_inv;
        }

        // Height profile along gravity, relative to the patch's own extent.
        let (mut z_lo, mut z_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &points {
            z_lo = z_lo.min(p.z);
            z_hi = z_hi.max(p.z);
        }
        let z_range = z_hi - z_lo;
        let p_inv = 1.0 / points.len() as f64;
        for p in &points {
            let bin = if z_range < 1e-9 {
                4
            } else {
                (((p.z - z_lo) / z_range * 9.0) as usize).min(8)
            };
            f[14 + bin] += p_inv;
        }

        // Direction from the patch centroid to the contact/handle point.
        let offset = contact.coords - frame.centroid.coords;
        let on = offset.norm();
        if on > 1e-9 {
            for k in 0..3 {
                f[23 + k] = offset[k] / on;
            }
        }

        // Category hash one-hot.
        f[26 + (fnv1a(category.as_bytes()) % 6) as usize] = 1.0;

        // L2-normalize and narrow to f32 storage.
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Embedding("zero-feature patch".into()));
        }
        let mut out = [0.0f32; EMBED_DIM];
        for k in 0..EMBED_DIM {
            out[k] = (f[k] / norm) as f32;
        }
        Ok(out)
    }
}

/// Cosine similarity, accumulated in f64.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for k in 0..EMBED_DIM {
        dot += a[k] as f64 * b[k] as f64;
        na += (a[k] as f64).powi(2);
        nb += (b[k] as f64).powi(2);
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
