//! Minimal static 3D kd-tree: build once, query nearest neighbors.
//! Buckets in this stack are small (thousands of points), so a plain
//! median-split tree without leaf packing is plenty.

use nalgebra::Point3;

#[derive(Debug, Clone)]
struct Node {
    point: [f64; 3],
    /// Index into the original point slice.
    index: usize,
    axis: usize,
    left: i32,
    right: i32,
}

/// Static kd-tree over a snapshot of points.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    root: i32,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut ids[..], 0, &mut nodes);
        KdTree { nodes, root }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn build_rec(points: &[Point3<f64>], ids: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> i32 {
        if ids.is_empty() {
            return -1;
        }
        let axis = depth % 3;
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let pivot = ids[mid];
        let slot = nodes.len();
        nodes.push(Node {
            point: [points[pivot].x, points[pivot].y, points[pivot].z],
            index: pivot,
            axis,
            left: -1,
            right: -1,
        });
        let (lo, rest) = ids.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, hi, depth + 1, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        slot as i32
    }

    /// Nearest neighbor: `(original index, squared distance)`.
    pub fn nearest(&self, query: &Point3<f64>) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, &q, &mut best);
        Some(best)
    }

    /// True if any point lies within `radius` of the query.
    pub fn has_neighbor_within(&self, query: &Point3<f64>, radius: f64) -> bool {
        self.nearest(query)
            .map_or(false, |(_, d2)| d2 <= radius * radius)
    }

    fn search(&self, node: i32, q: &[f64; 3], best: &mut (usize, f64)) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let dx = n.point[0] - q[0];
        let dy = n.point[1] - q[1];
        let dz = n.point[2] - q[2];
        let d2 = dx * dx + dy * dy + dz * dz;
        // Strict improvement keeps the lowest original index on exact ties,
        // matching a forward brute-force scan.
        if d2 < best.1 || (d2 == best.1 && n.index < best.0) {
            *best = (n.index, d2);
        }
        let diff = q[n.axis] - n.point[n.axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, best);
        if diff * diff <= best.1 {
            self.search(far, q, best);
        }
    }
}
