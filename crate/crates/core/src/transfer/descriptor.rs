//! Dense per-point geometric descriptors used for contact correspondence and
//! registration seeding. Each point of a part cloud gets a 16-dim unit vector
//! built from its position in the part's canonical frame, its surface normal,
//! and a local curvature proxy — all invariant to where the part sits in the
//! world, so corresponding points on two instances score near-zero distance.

use nalgebra::{Point3, Vector3};

use crate::geom::pca::LocalFrame;

pub const DESC_DIM: usize = 16;
pub type Descriptor = [f64; DESC_DIM];

/// Neighbors consulted by the curvature proxy.
const CURVATURE_NEIGHBORS: usize = 6;

/// Computes per-point descriptors for a part cloud. Implementations must be
/// deterministic functions of the geometry alone.
pub trait DescriptorProvider {
    fn field(&self, points: &[Point3<f64>], normals: &[Vector3<f64>]) -> Vec<Descriptor>;
}

/// Default provider. Feature layout per point:
/// - `[0..3]`   part-frame coordinates, scaled by the part's half-extents
/// - `[3..6]`   surface normal in the part frame
/// - `[6..12]`  distances to the six part-frame AABB faces, per-axis scaled
/// - `[12]`     curvature proxy: mean normal deviation over nearest neighbors
/// - `[13..16]` unit radial direction from the part centroid
///
/// The per-axis scaling makes corresponding points on uniformly scaled
/// instances produce (nearly) identical descriptors; the final vector is
/// L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeometricDescriptor;

impl DescriptorProvider for GeometricDescriptor {
    fn field(&self, points: &[Point3<f64>], normals: &[Vector3<f64>]) -> Vec<Descriptor> {
        assert_eq!(points.len(), normals.len());
        if points.is_empty() {
            return Vec::new();
        }
        let frame = LocalFrame::fit(points).expect("non-empty cloud");
        let local: Vec<Vector3<f64>> = points.iter().map(|p| frame.to_local(p).coords).collect();

        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for l in &local {
            for k in 0..3 {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(l[k]);
            }
        }
        let ext = Vector3::new(
            (hi.x - lo.x).max(1e-9),
            (hi.y - lo.y).max(1e-9),
            (hi.z - lo.z).max(1e-9),
        );

        let curvature = curvature_proxy(points, normals);

        let mut field = Vec::with_capacity(points.len());
        for (i, l) in local.iter().enumerate() {
            let n = frame.dir_to_local(&normals[i]);
            let radial = if l.norm() > 1e-12 {
                l / l.norm()
            } else {
                Vector3::zeros()
            };
            let mut f = [0.0; DESC_DIM];
            for k in 0..3 {
                f[k] = l[k] / (0.5 * ext[k]);
                f[3 + k] = n[k];
                f[6 + 2 * k] = (l[k] - lo[k]) / ext[k];
                f[7 + 2 * k] = (hi[k] - l[k]) / ext[k];
                f[13 + k] = radial[k];
            }
            f[12] = curvature[i];
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for x in &mut f {
                *x /= norm;
            }
            field.push(f);
        }
        field
    }
}

/// Mean normal deviation `(1 - n·n_j)/2` over each point's nearest neighbors;
/// 0 on planes, larger across edges. Brute-force selection keeps it an exact
/// function of the geometry.
fn curvature_proxy(points: &[Point3<f64>], normals: &[Vector3<f64>]) -> Vec<f64> {
    let n = points.len();
    let k = CURVATURE_NEIGHBORS.min(n.saturating_sub(1));
    let mut out = vec![0.0; n];
    if k == 0 {
        return out;
    }
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..n {
        best.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2 = (points[j] - points[i]).norm_squared();
            let pos = best.partition_point(|&(bd, bj)| (bd, bj) < (d2, j));
            if pos < k {
                best.insert(pos, (d2, j));
                best.truncate(k);
            }
        }
        let mut acc = 0.0;
        for &(_, j) in &best {
            acc += (1.0 - normals[i].dot(&normals[j])) * 0.5;
        }
        out[i] = acc / best.len() as f64;
    }
    out
}

/// Squared L2 distance between two descriptors.
pub fn descriptor_distance2(a: &Descriptor, b: &Descriptor) -> f64 {
    let mut s = 0.0;
    for k in 0..DESC_DIM {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// Descriptor of the cloud point nearest to a query position, along with that
/// point's index. Used to evaluate the source contact's descriptor from the
/// stored crop (the crop is the back-projected source view, so the nearest
/// point is the pixel the contact projects to).
pub fn descriptor_at(
    points: &[Point3<f64>],
    normals: &[Vector3<f64>],
    query: &Point3<f64>,
    provider: &dyn DescriptorProvider,
) -> Option<(usize, Descriptor)> {
    if points.is_empty() {
        return None;
    }
    let field = provider.field(points, normals);
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d2 = (p - query).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    Some((best, field[best]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lumpy_cloud(n: usize, seed: u64) -> (Vec<Point3<f64>>, Vec<Vector3<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::with_capacity(n);
        let mut nrm = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(0.0f64..1.0).powi(2);
            pts.push(Point3::new(x, rng.random_range(-0.3..0.5), rng.random_range(-0.1..0.1)));
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            nrm.push(v.normalize());
        }
        (pts, nrm)
    }

    #[test]
    fn descriptors_are_unit_norm_and_deterministic() {
        let (pts, nrm) = lumpy_cloud(120, 3);
        let a = GeometricDescriptor.field(&pts, &nrm);
        let b = GeometricDescriptor.field(&pts, &nrm);
        for (fa, fb) in a.iter().zip(&b) {
            assert_eq!(fa, fb);
            let norm: f64 = fa.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn descriptors_ignore_rigid_placement() {
        let (pts, nrm) = lumpy_cloud(150, 5);
        let iso = nalgebra::Isometry3::from_parts(
            nalgebra::Translation3::new(0.7, -1.2, 0.4),
            nalgebra::UnitQuaternion::from_euler_angles(0.4, -0.2, 1.1),
        );
        let pts2: Vec<_> = pts.iter().map(|p| iso.transform_point(p)).collect();
        let nrm2: Vec<_> = nrm.iter().map(|v| iso.rotation * v).collect();
        let a = GeometricDescriptor.field(&pts, &nrm);
        let b = GeometricDescriptor.field(&pts2, &nrm2);
        for (fa, fb) in a.iter().zip(&b) {
            assert!(descriptor_distance2(fa, fb) < 1e-12);
        }
    }

    #[test]
    fn curvature_is_zero_on_a_plane() {
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Point3::new(i as f64 * 0.01, j as f64 * 0.013, 0.0));
                nrm.push(Vector3::z());
            }
        }
        let c = curvature_proxy(&pts, &nrm);
        assert!(c.iter().all(|&v| v.abs() < 1e-12));
    }
}
