//! Principal-axis local frames for point clouds, with the third-moment sign
//! rule so that mirrored inputs resolve to the same canonical frame.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};

use super::Pose;

/// Canonical frame of a cloud: centroid origin, principal axes as the basis.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    pub centroid: Point3<f64>,
    /// Columns are the principal axes (descending variance), right-handed.
    pub basis: Matrix3<f64>,
    /// Eigenvalues of the covariance, descending.
    pub eigenvalues: [f64; 3],
}

impl LocalFrame {
    /// Fits a frame by PCA. Axis signs are disambiguated by the third central
    /// moment of the projections; the last axis is forced right-handed.
    pub fn fit(points: &[Point3<f64>]) -> Option<LocalFrame> {
        if points.is_empty() {
            return None;
        }
        let n = points.len() as f64;
        let mut c = Vector3::zeros();
        for p in points {
            c += p.coords;
        }
        c /= n;

        let mut cov = Matrix3::zeros();
        for p in points {
            let d = p.coords - c;
            cov += d * d.transpose();
        }
        cov /= n;

        let eig = cov.symmetric_eigen();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let mut axes = [Vector3::zeros(), Vector3::zeros(), Vector3::zeros()];
        let mut vals = [0.0; 3];
        for (slot, &src) in order.iter().enumerate() {
            axes[slot] = eig.eigenvectors.column(src).into_owned();
            vals[slot] = eig.eigenvalues[src].max(0.0);
        }

        // Third-moment sign rule on the first two axes.
        for axis in axes.iter_mut().take(2) {
            let m3: f64 = points
                .iter()
                .map(|p| {
                    let t = (p.coords - c).dot(axis);
                    t * t * t
                })
                .sum();
            if m3 < 0.0 {
                *axis = -*axis;
            }
        }
        axes[2] = axes[0].cross(&axes[1]);

        let mut basis = Matrix3::zeros();
        for (i, a) in axes.iter().enumerate() {
            basis.set_column(i, a);
        }
        Some(LocalFrame {
            centroid: Point3::from(c),
            basis,
            eigenvalues: vals,
        })
    }

    /// World -> local coordinates.
    pub fn to_local(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.basis.transpose() * (p.coords - self.centroid.coords))
    }

    /// Local -> world coordinates.
    pub fn to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.basis * p.coords + self.centroid.coords)
    }

    /// World -> local for directions (no translation).
    pub fn dir_to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.basis.transpose() * v
    }

    /// The frame as a local->world isometry.
    pub fn as_pose(&self) -> Pose {
        let rot = Rotation3::from_matrix_unchecked(self.basis);
        Isometry3::from_parts(
            Translation3::from(self.centroid.coords),
            UnitQuaternion::from_rotation_matrix(&rot),
        )
    }

    /// Rank of the cloud at the given eigenvalue tolerance.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > tol).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn skewed_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
        // Asymmetric so the third-moment rule has signal.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(0.0f64..2.0).powi(2);
                Point3::new(x, rng.random_range(-0.3..0.5), rng.random_range(-0.1..0.1))
            })
            .collect()
    }

    #[test]
    fn frame_round_trip() {
        let pts = skewed_cloud(200, 7);
        let f = LocalFrame::fit(&pts).unwrap();
        for p in &pts {
            let q = f.to_world(&f.to_local(p));
            assert_relative_eq!((q - p).norm(), 0.0, epsilon = 1e-10);
        }
        assert_relative_eq!(f.basis.determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn frame_is_translation_equivariant() {
        let pts = skewed_cloud(200, 8);
        let shift = Vector3::new(0.4, -0.2, 1.0);
        let moved: Vec<_> = pts.iter().map(|p| p + shift).collect();
        let fa = LocalFrame::fit(&pts).unwrap();
        let fb = LocalFrame::fit(&moved).unwrap();
        assert_relative_eq!((fb.centroid - fa.centroid - shift).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!((fb.basis - fa.basis).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn sign_rule_canonicalizes_rotated_copies() {
        let pts = skewed_cloud(300, 9);
        let rot = UnitQuaternion::from_euler_angles(0.3, -0.8, 1.4);
        let moved: Vec<_> = pts.iter().map(|p| rot * p).collect();
        let fa = LocalFrame::fit(&pts).unwrap();
        let fb = LocalFrame::fit(&moved).unwrap();
        // Local coordinates must agree regardless of the world rotation.
        for (p, q) in pts.iter().zip(moved.iter()).take(50) {
            let la = fa.to_local(p);
            let lb = fb.to_local(q);
            assert_relative_eq!((la - lb).norm(), 0.0, epsilon = 1e-8);
        }
    }
}
