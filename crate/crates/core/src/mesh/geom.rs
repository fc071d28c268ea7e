//! Primitive geometric queries shared by the spatial index and the oracles in tests.

use super::{Point, Vec3};

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb { min: self.min - m, max: self.max + m }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    /// Slab test. Returns the entry parameter if the ray hits the box before `t_max`.
    pub fn ray_entry(&self, origin: &Point, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let mut a = (self.min[k] - origin[k]) * inv_dir[k];
            let mut b = (self.max[k] - origin[k]) * inv_dir[k];
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN (0 * inf) means the origin sits on a slab plane of a flat box; keep the interval.
            if a.is_nan() || b.is_nan() {
                continue;
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Which feature of the triangle the closest point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangleFeature {
    Face,
    Edge(usize),
    Vertex(usize),
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
///
/// Returns the point and its barycentric weights for `a`, `b`, `c`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> (Point, [f64; 3], TriangleFeature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0], TriangleFeature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0], TriangleFeature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0], TriangleFeature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0], TriangleFeature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w], TriangleFeature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w], TriangleFeature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w], TriangleFeature::Face)
}

/// Möller–Trumbore ray/triangle intersection. Returns the ray parameter of the hit.
///
/// Hits are two-sided.
pub fn ray_triangle(origin: &Point, dir: &Vec3, a: &Point, b: &Point, c: &Point) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}

/// Unnormalized normal (twice the area) of a triangle.
pub fn triangle_cross(a: &Point, b: &Point, c: &Point) -> Vec3 {
    (b - a).cross(&(c - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_point_regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let (q, _, f) = closest_point_on_triangle(&Point::new(0.2, 0.2, 3.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Face);
        assert!((q - Point::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        let (q, _, f) = closest_point_on_triangle(&Point::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Vertex(0));
        assert_eq!(q, a);
        let (q, bary, f) = closest_point_on_triangle(&Point::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Edge(1));
        assert!((q - Point::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ray_hits_and_misses() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let o = Point::new(0.25, 0.25, 2.0);
        assert_eq!(ray_triangle(&o, &Vec3::new(0.0, 0.0, -1.0), &a, &b, &c), Some(2.0));
        assert_eq!(ray_triangle(&o, &Vec3::new(0.0, 0.0, 1.0), &a, &b, &c), Some(-2.0));
        assert_eq!(ray_triangle(&Point::new(2.0, 2.0, 1.0), &Vec3::new(0.0, 0.0, -1.0), &a, &b, &c), None);
    }

    #[test]
    fn aabb_distance_and_slab() {
        let b = Aabb { min: Point::new(0.0, 0.0, 0.0), max: Point::new(1.0, 1.0, 1.0) };
        assert_eq!(b.distance_squared(&Point::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance_squared(&Point::new(2.0, 0.5, 0.5)) - 1.0).abs() < 1e-15);
        let d = Vec3::new(1.0, 0.0, 0.0);
        let inv = d.map(|x| 1.0 / x);
        assert_eq!(b.ray_entry(&Point::new(-1.0, 0.5, 0.5), &inv, f64::INFINITY), Some(1.0));
        assert_eq!(b.ray_entry(&Point::new(-1.0, 2.0, 0.5), &inv, f64::INFINITY), None);
    }
}
