//! Bounding volume hierarchy over mesh faces.
//!
//! Median split on the longest centroid axis, at most [`LEAF_SIZE`] faces per
//! leaf. The index copies triangle positions so queries never touch the mesh.

use super::geom::{self, Aabb, TriangleFeature};
use super::{Mesh, Point, Vec3};

pub const LEAF_SIZE: usize = 4;

/// Rays ignore hits closer than this to their origin.
pub const RAY_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
pub struct ClosestHit {
    pub distance: f64,
    pub point: Point,
    pub face_index: usize,
    pub feature: TriangleFeature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face_index: usize,
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot; interior: index of the left child (right = left + 1).
    start: usize,
    /// Number of triangles for a leaf, zero for interior nodes.
    count: usize,
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    nodes: Vec<Node>,
    tris: Vec<[Point; 3]>,
    face_ids: Vec<usize>,
    normals: Vec<Vec3>,
}

impl SpatialIndex {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.face_count();
        let mut order: Vec<usize> = (0..n).collect();
        let centroids: Vec<Point> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let boxes: Vec<Aabb> = (0..n).map(|f| mesh.face_aabb(f)).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
        if n > 0 {
            build(&mut nodes, 0, &mut order, 0, &centroids, &boxes);
        }
        let tris = order.iter().map(|&f| mesh.triangle(f)).collect();
        let normals = order.iter().map(|&f| mesh.face_normals()[f]).collect();
        Self { nodes, tris, face_ids: order, normals }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn face_count(&self) -> usize {
        self.tris.len()
    }

    /// Globally nearest point on the mesh. Returns `None` only for an empty index.
    pub fn closest_point(&self, query: &Point) -> Option<ClosestHit> {
        self.closest_point_slot(query, f64::INFINITY).map(|(hit, _)| hit)
    }

    /// Nearest point together with the unit normal of the face it lies on.
    pub fn closest_point_with_normal(&self, query: &Point) -> Option<(ClosestHit, Vec3)> {
        self.closest_point_slot(query, f64::INFINITY).map(|(hit, slot)| (hit, self.normals[slot]))
    }

    fn closest_point_slot(&self, query: &Point, max_dist: f64) -> Option<(ClosestHit, usize)> {
        if self.is_empty() {
            return None;
        }
        let mut best_d2 = max_dist * max_dist;
        let mut best: Option<(ClosestHit, usize)> = None;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(query)));
        while let Some((ni, d2)) = stack.pop() {
            if d2 > best_d2 {
                continue;
            }
            let node = &self.nodes[ni];
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let [a, b, c] = &self.tris[slot];
                    let (p, _, feature) = geom::closest_point_on_triangle(query, a, b, c);
                    let dd = (p - query).norm_squared();
                    let better = match &best {
                        None => dd <= best_d2,
                        Some((h, _)) => dd < best_d2 || (dd == best_d2 && self.face_ids[slot] < h.face_index),
                    };
                    if better {
                        best_d2 = dd;
                        best = Some((
                            ClosestHit { distance: dd.sqrt(), point: p, face_index: self.face_ids[slot], feature },
                            slot,
                        ));
                    }
                }
            } else {
                let l = node.start;
                let r = l + 1;
                let dl = self.nodes[l].bounds.distance_squared(query);
                let dr = self.nodes[r].bounds.distance_squared(query);
                // Visit the nearer child first (pushed last).
                if dl < dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }

    /// Nearest intersection with `t > RAY_EPS`.
    pub fn ray_intersect(&self, origin: &Point, dir: &Vec3) -> Option<RayHit> {
        if self.is_empty() {
            return None;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut best_t = f64::INFINITY;
        let mut best: Option<RayHit> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, best_t).is_none() {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let [a, b, c] = &self.tris[slot];
                    if let Some(t) = geom::ray_triangle(origin, dir, a, b, c) {
                        let face = self.face_ids[slot];
                        let better =
                            t > RAY_EPS && (t < best_t || (t == best_t && best.is_some_and(|h| face < h.face_index)));
                        if better {
                            best_t = t;
                            best = Some(RayHit { t, face_index: face });
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        best
    }

    /// True if the ray hits anything with `RAY_EPS < t < t_max`.
    pub fn ray_occluded(&self, origin: &Point, dir: &Vec3, t_max: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let [a, b, c] = &self.tris[slot];
                    if let Some(t) = geom::ray_triangle(origin, dir, a, b, c) {
                        if t > RAY_EPS && t < t_max {
                            return true;
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        false
    }

    /// Number of surface crossings along the ray (`t > RAY_EPS`).
    pub fn ray_crossings(&self, origin: &Point, dir: &Vec3) -> usize {
        if self.is_empty() {
            return 0;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, f64::INFINITY).is_none() {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let [a, b, c] = &self.tris[slot];
                    if let Some(t) = geom::ray_triangle(origin, dir, a, b, c) {
                        if t > RAY_EPS {
                            count += 1;
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        count
    }

    /// Faces whose bounding boxes overlap `region`, in ascending face order.
    pub fn faces_in_aabb(&self, region: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !node.bounds.overlaps(region) {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    if Aabb::from_points(&self.tris[slot]).overlaps(region) {
                        out.push(self.face_ids[slot]);
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        out.sort_unstable();
        out
    }

    /// Checks the structural invariants: every face in exactly one leaf and
    /// node bounds containing their faces.
    pub fn validate(&self) -> bool {
        let mut seen = vec![0u32; self.tris.len()];
        let mut stack = vec![0usize];
        if self.is_empty() {
            return true;
        }
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.count > 0 {
                if node.count > LEAF_SIZE {
                    return false;
                }
                let range = node.start..node.start + node.count;
                for (count, tri) in seen[range.clone()].iter_mut().zip(&self.tris[range]) {
                    *count += 1;
                    if !tri.iter().all(|p| node.bounds.contains(p)) {
                        return false;
                    }
                }
            } else {
                for child in [node.start, node.start + 1] {
                    let cb = &self.nodes[child].bounds;
                    if !(node.bounds.contains(&cb.min) && node.bounds.contains(&cb.max)) {
                        return false;
                    }
                    stack.push(child);
                }
            }
        }
        let mut ids = self.face_ids.clone();
        ids.sort_unstable();
        seen.iter().all(|&s| s == 1) && ids.iter().enumerate().all(|(i, &f)| i == f)
    }
}

fn build(nodes: &mut Vec<Node>, ni: usize, order: &mut [usize], offset: usize, centroids: &[Point], boxes: &[Aabb]) {
    let bounds = order.iter().fold(Aabb::empty(), |acc, &f| acc.union(&boxes[f]));
    if order.len() <= LEAF_SIZE {
        nodes[ni] = Node { bounds, start: offset, count: order.len() };
        return;
    }
    let cb = Aabb::from_points(order.iter().map(|&f| &centroids[f]));
    let axis = cb.longest_axis();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    let left = nodes.len();
    nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
    nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
    nodes[ni] = Node { bounds, start: left, count: 0 };
    let (lo, hi) = order.split_at_mut(mid);
    build(nodes, left, lo, offset, centroids, boxes);
    build(nodes, left + 1, hi, offset + mid, centroids, boxes);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_closest(mesh: &Mesh, q: &Point) -> f64 {
        (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (geom::closest_point_on_triangle(q, &a, &b, &c).0 - q).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn brute_ray(mesh: &Mesh, o: &Point, d: &Vec3) -> Option<f64> {
        (0..mesh.face_count())
            .filter_map(|f| {
                let [a, b, c] = mesh.triangle(f);
                geom::ray_triangle(o, d, &a, &b, &c).filter(|&t| t > RAY_EPS)
            })
            .reduce(f64::min)
    }

    #[test]
    fn plane_closest_point() {
        let plane = shapes::plane_grid(4.0, 4);
        let idx = SpatialIndex::new(&plane);
        let hit = idx.closest_point(&Point::new(0.0, 0.0, 1.0)).unwrap();
        assert!((hit.distance - 1.0).abs() < 1e-15);
        assert!((hit.point - Point::origin()).norm() < 1e-15);
        let on = idx.closest_point(&Point::new(0.3, -0.7, 0.0)).unwrap();
        assert!(on.distance < 1e-12);
    }

    #[test]
    fn cube_ray() {
        let cube = shapes::unit_cube().translated(&Vec3::repeat(-0.5));
        let idx = SpatialIndex::new(&cube);
        let hit = idx.ray_intersect(&Point::new(0.0, 0.0, 2.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((hit.t - 1.5).abs() < 1e-15);
        assert!((cube.face_normals()[hit.face_index] - Vec3::z()).norm() < 1e-12);
        assert!(idx.ray_intersect(&Point::new(0.0, 0.0, 2.0), &Vec3::new(0.0, 0.0, 1.0)).is_none());
        assert_eq!(idx.ray_crossings(&Point::new(0.1, 0.2, 2.0), &Vec3::new(0.0, 0.0, -1.0)), 2);
    }

    #[test]
    fn random_queries_match_brute_force() {
        let mesh = shapes::icosphere(3.0, 3);
        let idx = SpatialIndex::new(&mesh);
        assert!(idx.validate());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let q = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let hit = idx.closest_point(&q).unwrap();
            assert!((hit.distance - brute_closest(&mesh, &q)).abs() < 1e-9);
            assert!(((hit.point - q).norm() - hit.distance).abs() < 1e-12);
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let got = idx.ray_intersect(&q, &d).map(|h| h.t);
            let want = brute_ray(&mesh, &q, &d);
            match (got, want) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn faces_in_region() {
        let plane = shapes::plane_grid(4.0, 8);
        let idx = SpatialIndex::new(&plane);
        let region = Aabb { min: Point::new(-0.1, -0.1, -1.0), max: Point::new(0.1, 0.1, 1.0) };
        let got = idx.faces_in_aabb(&region);
        let want: Vec<usize> = (0..plane.face_count()).filter(|&f| plane.face_aabb(f).overlaps(&region)).collect();
        assert_eq!(got, want);
    }
}
