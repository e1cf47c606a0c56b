//! Convex intersection tests for the primitive set.
//!
//! Box-box pairs use the separating-axis test (exact). Pairs involving a
//! cylinder fall back to GJK on support mappings, which is exact for convex
//! shapes up to floating-point tolerance.

use nalgebra::{Matrix3, Vector3};

use super::shapes::{support_point, PrimitiveKind, Shape};
use super::Pose;

/// True if any primitive of `a` intersects any primitive of `b`.
pub fn shapes_intersect(a: &Shape, a_pose: &Pose, b: &Shape, b_pose: &Pose) -> bool {
    for pa in &a.primitives {
        let wa = a_pose * pa.local_pose;
        for pb in &b.primitives {
            let wb = b_pose * pb.local_pose;
            if primitives_intersect(&pa.kind, &wa, &pb.kind, &wb) {
                return true;
            }
        }
    }
    false
}

/// Intersection test for a single primitive pair at world poses.
pub fn primitives_intersect(
    a: &PrimitiveKind,
    a_pose: &Pose,
    b: &PrimitiveKind,
    b_pose: &Pose,
) -> bool {
    match (a, b) {
        (PrimitiveKind::Box { half_extents: ha }, PrimitiveKind::Box { half_extents: hb }) => {
            obb_overlap_sat(ha, a_pose, hb, b_pose)
        }
        _ => gjk_intersect(a, a_pose, b, b_pose),
    }
}

/// Separating-axis overlap test for two oriented boxes.
fn obb_overlap_sat(ha: &[f64; 3], a_pose: &Pose, hb: &[f64; 3], b_pose: &Pose) -> bool {
    let ra = a_pose.rotation.to_rotation_matrix();
    let rb = b_pose.rotation.to_rotation_matrix();
    let a_axes: [Vector3<f64>; 3] = [
        ra.matrix().column(0).into(),
        ra.matrix().column(1).into(),
        ra.matrix().column(2).into(),
    ];
    let b_axes: [Vector3<f64>; 3] = [
        rb.matrix().column(0).into(),
        rb.matrix().column(1).into(),
        rb.matrix().column(2).into(),
    ];
    let t = b_pose.translation.vector - a_pose.translation.vector;

    // R[i][j] = a_i . b_j, with an epsilon pad against near-parallel edges.
    let mut r = Matrix3::zeros();
    let mut abs_r = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            r[(i, j)] = a_axes[i].dot(&b_axes[j]);
            abs_r[(i, j)] = r[(i, j)].abs() + 1e-12;
        }
    }
    let t_a = Vector3::new(t.dot(&a_axes[0]), t.dot(&a_axes[1]), t.dot(&a_axes[2]));

    // A's face axes.
    for i in 0..3 {
        let rb_proj = hb[0] * abs_r[(i, 0)] + hb[1] * abs_r[(i, 1)] + hb[2] * abs_r[(i, 2)];
        if t_a[i].abs() > ha[i] + rb_proj {
            return false;
        }
    }
    // B's face axes.
    for j in 0..3 {
        let ra_proj = ha[0] * abs_r[(0, j)] + ha[1] * abs_r[(1, j)] + ha[2] * abs_r[(2, j)];
        let dist = (t_a[0] * r[(0, j)] + t_a[1] * r[(1, j)] + t_a[2] * r[(2, j)]).abs();
        if dist > ra_proj + hb[j] {
            return false;
        }
    }
    // Edge-edge cross products a_i x b_j.
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            let ra_proj = ha[i1] * abs_r[(i2, j)] + ha[i2] * abs_r[(i1, j)];
            let rb_proj = hb[j1] * abs_r[(i, j2)] + hb[j2] * abs_r[(i, j1)];
            let dist = (t_a[i2] * r[(i1, j)] - t_a[i1] * r[(i2, j)]).abs();
            if dist > ra_proj + rb_proj {
                return false;
            }
        }
    }
    true
}

/// GJK boolean intersection on support mappings.
fn gjk_intersect(a: &PrimitiveKind, a_pose: &Pose, b: &PrimitiveKind, b_pose: &Pose) -> bool {
    let support = |d: &Vector3<f64>| -> Vector3<f64> {
        let pa = support_point(a, a_pose, d);
        let pb = support_point(b, b_pose, &-d);
        pa - pb
    };

    let mut dir = b_pose.translation.vector - a_pose.translation.vector;
    if dir.norm_squared() < 1e-20 {
        dir = Vector3::x();
    }
    let mut simplex: Vec<Vector3<f64>> = vec![support(&dir)];
    dir = -simplex[0];

    for _ in 0..64 {
        if dir.norm_squared() < 1e-18 {
            // Origin on the simplex boundary: touching counts as intersecting.
            return true;
        }
        let p = support(&dir);
        if p.dot(&dir) < 0.0 {
            return false;
        }
        simplex.push(p);
        if update_simplex(&mut simplex, &mut dir) {
            return true;
        }
    }
    // Did not converge; desk-scale shapes are tame so treat as touching.
    true
}

/// Refines the simplex toward the origin. Returns true if it encloses the origin.
fn update_simplex(simplex: &mut Vec<Vector3<f64>>, dir: &mut Vector3<f64>) -> bool {
    match simplex.len() {
        2 => {
            let a = simplex[1];
            let b = simplex[0];
            let ab = b - a;
            let ao = -a;
            if ab.dot(&ao) > 0.0 {
                *dir = ab.cross(&ao).cross(&ab);
            } else {
                simplex.remove(0);
                *dir = ao;
            }
            false
        }
        3 => {
            let a = simplex[2];
            let b = simplex[1];
            let c = simplex[0];
            let ab = b - a;
            let ac = c - a;
            let ao = -a;
            let abc = ab.cross(&ac);
            if abc.cross(&ac).dot(&ao) > 0.0 {
                if ac.dot(&ao) > 0.0 {
                    simplex.remove(1);
                    *dir = ac.cross(&ao).cross(&ac);
                } else {
                    simplex.remove(0);
                    return update_simplex(simplex, dir);
                }
            } else if ab.cross(&abc).dot(&ao) > 0.0 {
                simplex.remove(0);
                return update_simplex(simplex, dir);
            } else if abc.dot(&ao) > 0.0 {
                *dir = abc;
            } else {
                simplex.swap(0, 1);
                *dir = -abc;
            }
            false
        }
        4 => {
            let a = simplex[3];
            let b = simplex[2];
            let c = simplex[1];
            let d = simplex[0];
            let ao = -a;
            let abc = (b - a).cross(&(c - a));
            let acd = (c - a).cross(&(d - a));
            let adb = (d - a).cross(&(b - a));
            if abc.dot(&ao) > 0.0 {
                simplex.remove(0);
                *dir = abc;
                return update_simplex(simplex, dir);
            }
            if acd.dot(&ao) > 0.0 {
                simplex.remove(2);
                *dir = acd;
                return update_simplex(simplex, dir);
            }
            if adb.dot(&ao) > 0.0 {
                simplex.remove(1);
                simplex.swap(0, 1);
                *dir = adb;
                return update_simplex(simplex, dir);
            }
            true
        }
        _ => false,
    }
}
