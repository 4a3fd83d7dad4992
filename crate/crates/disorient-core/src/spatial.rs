//! Static kd-tree for exact nearest-neighbour queries.
//!
//! Built once over a scan, queried many times. Splits on the axis of
//! largest spread at the median point, so lookups stay O(log n) on the
//! mildly clustered clouds LiDAR produces. All query results are fully
//! deterministic: distance ties are broken toward the lower point index.

use crate::error::{Error, Result};
use crate::se3::Vec3;

#[derive(Debug, Clone)]
struct Node {
    /// Index into the original point slice.
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

const NO_CHILD: i32 = -1;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
    root: i32,
}

fn spread_axis(points: &[Vec3], idx: &[u32]) -> u8 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut best = 0;
    for a in 1..3 {
        if hi[a] - lo[a] > hi[best] - lo[best] {
            best = a;
        }
    }
    best as u8
}

impl KdTree {
    /// Builds a tree over `points`. Fails on an empty slice or any
    /// non-finite coordinate.
    pub fn build(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinitePoint { index: i });
            }
        }
        let mut idx: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_rec(points, &mut idx, &mut nodes);
        Ok(Self {
            points: points.to_vec(),
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point to `q` as (distance, index).
    pub fn nearest_one(&self, q: &Vec3) -> (f64, usize) {
        let mut found = self.knn(q, 1);
        let (d, i) = found.pop().expect("tree is never empty");
        (d, i)
    }

    /// The `k` nearest points to `q`, ascending by (distance, index).
    /// Returns fewer when the tree holds fewer than `k` points.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<(f64, usize)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_rec(self.root, q, k, &mut heap);
        heap.sort_by(cmp_dist_idx);
        heap.iter().map(|&(d2, i)| (d2.sqrt(), i)).collect()
    }

    fn knn_rec(&self, node: i32, q: &Vec3, k: usize, heap: &mut Vec<(f64, usize)>) {
        if node == NO_CHILD {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let d2 = (p - q).norm_squared();
        push_bounded(heap, k, (d2, n.point as usize));

        let delta = q[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.knn_rec(near, q, k, heap);
        // Visit the far side unless the splitting plane is strictly
        // farther than the current worst candidate.
        if heap.len() < k || delta * delta <= heap_worst(heap) {
            self.knn_rec(far, q, k, heap);
        }
    }

    /// All point indices within `radius` of `q` (inclusive), ascending.
    pub fn within_radius(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if radius >= 0.0 {
            self.radius_rec(self.root, q, radius * radius, &mut out);
            out.sort_unstable();
        }
        out
    }

    fn radius_rec(&self, node: i32, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        if node == NO_CHILD {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        if (p - q).norm_squared() <= r2 {
            out.push(n.point as usize);
        }
        let delta = q[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.radius_rec(near, q, r2, out);
        if delta * delta <= r2 {
            self.radius_rec(far, q, r2, out);
        }
    }
}

fn cmp_dist_idx(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .expect("distances are finite")
        .then(a.1.cmp(&b.1))
}

fn heap_worst(heap: &[(f64, usize)]) -> f64 {
    heap.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max)
}

fn push_bounded(heap: &mut Vec<(f64, usize)>, k: usize, entry: (f64, usize)) {
    heap.push(entry);
    if heap.len() > k {
        // Drop the worst by (distance, index); k is small, a scan is fine.
        let worst = heap
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| cmp_dist_idx(a, b))
            .map(|(i, _)| i)
            .expect("heap is non-empty");
        heap.swap_remove(worst);
    }
}

fn build_rec(points: &[Vec3], idx: &mut [u32], nodes: &mut Vec<Node>) -> i32 {
    if idx.is_empty() {
        return NO_CHILD;
    }
    let axis = spread_axis(points, idx);
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis as usize]
            .partial_cmp(&points[b as usize][axis as usize])
            .expect("coordinates are finite")
            .then(a.cmp(&b))
    });
    let point = idx[mid];
    let slot = nodes.len();
    nodes.push(Node {
        point,
        axis,
        left: NO_CHILD,
        right: NO_CHILD,
    });
    let (lo, rest) = idx.split_at_mut(mid);
    let left = build_rec(points, lo, nodes);
    let right = build_rec(points, &mut rest[1..], nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    slot as i32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(cmp_dist_idx);
        all.truncate(k);
        all.iter().map(|&(d2, i)| (d2.sqrt(), i)).collect()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    #[test]
    fn knn_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = random_cloud(&mut rng, 400);
        let tree = KdTree::build(&pts).unwrap();
        for _ in 0..50 {
            let q = Vec3::new(
                rng.random_range(-12.0..12.0),
                rng.random_range(-12.0..12.0),
                rng.random_range(-3.0..3.0),
            );
            for k in [1, 3, 10] {
                let got = tree.knn(&q, k);
                let want = linear_knn(&pts, &q, k);
                assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(&want) {
                    assert_eq!(g.1, w.1);
                    assert!((g.0 - w.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn radius_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_cloud(&mut rng, 300);
        let tree = KdTree::build(&pts).unwrap();
        for _ in 0..30 {
            let q = Vec3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-2.0..2.0),
            );
            let r = rng.random_range(0.5..4.0);
            let got = tree.within_radius(&q, r);
            let want: Vec<usize> = pts
                .iter()
                .enumerate()
                .filter(|(_, p)| (*p - q).norm() <= r)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn duplicate_points_break_ties_by_index() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let pts = vec![p, p, p, Vec3::new(5.0, 5.0, 5.0)];
        let tree = KdTree::build(&pts).unwrap();
        let got = tree.knn(&p, 2);
        assert_eq!(got[0].1, 0);
        assert_eq!(got[1].1, 1);
        assert_eq!(got[0].0, 0.0);
    }

    #[test]
    fn handles_k_larger_than_cloud() {
        let pts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)];
        let tree = KdTree::build(&pts).unwrap();
        assert_eq!(tree.knn(&Vec3::zeros(), 10).len(), 2);
    }

    #[test]
    fn empty_build_fails() {
        assert!(KdTree::build(&[]).is_err());
    }

    #[test]
    fn non_finite_point_fails() {
        let pts = vec![Vec3::new(f64::NAN, 0.0, 0.0)];
        assert!(KdTree::build(&pts).is_err());
    }

    #[test]
    fn nearest_one_on_grid() {
        let pts: Vec<Vec3> = (0..5)
            .flat_map(|x| (0..5).map(move |y| Vec3::new(x as f64, y as f64, 0.0)))
            .collect();
        let tree = KdTree::build(&pts).unwrap();
        let (d, i) = tree.nearest_one(&Vec3::new(2.2, 3.1, 0.0));
        assert_eq!(pts[i], Vec3::new(2.0, 3.0, 0.0));
        assert!((d - (0.04f64 + 0.01).sqrt()).abs() < 1e-12);
    }
}
