//! Brute-force reference implementations shared by the integration tests.
//! They deliberately avoid the library's geometry kernels.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use surfmark::mesh::SpatialIndex;
use surfmark::placement::{candidate_loss, CandidateBox};
use surfmark::{Mesh, Point, Vec3};

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to triangle `abc`: orthogonal projection when it lands
/// inside (same-side test on all three edges), else the nearest edge.
pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    if nn > 0.0 {
        let q = p - n * ((p - a).dot(&n) / nn);
        let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
        if inside {
            return (p - q).norm();
        }
    }
    segment_distance(p, a, b).min(segment_distance(p, b, c)).min(segment_distance(p, c, a))
}

/// Distance from `p` to the nearest face of `mesh`, scanning every face.
pub fn brute_distance(mesh: &Mesh, p: &Point) -> f64 {
    (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            point_triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Ray parameter where `o + t d` crosses the plane of `abc` inside the
/// triangle, for `t > t_min`.
pub fn ray_triangle_oracle(o: &Point, d: &Vec3, a: &Point, b: &Point, c: &Point, t_min: f64) -> Option<f64> {
    let n = (b - a).cross(&(c - a));
    let denom = n.dot(d);
    if denom == 0.0 {
        return None;
    }
    let t = n.dot(&(a - o)) / denom;
    if t <= t_min {
        return None;
    }
    let q = o + d * t;
    let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    inside.then_some(t)
}

/// Nearest ray hit over every face of `mesh`.
pub fn brute_first_hit(mesh: &Mesh, o: &Point, d: &Vec3, t_min: f64) -> Option<f64> {
    (0..mesh.face_count())
        .filter_map(|f| {
            let [a, b, c] = mesh.triangle(f);
            ray_triangle_oracle(o, d, &a, &b, &c, t_min)
        })
        .min_by(|x, y| x.partial_cmp(y).unwrap())
}

pub const OTSU_BINS: usize = 256;

pub fn otsu_bin(v: f64) -> usize {
    ((v * OTSU_BINS as f64).floor().max(0.0) as usize).min(OTSU_BINS - 1)
}

/// Exhaustive Otsu search over 256 bins: for every cut `k` (class 0 is bins
/// `0..=k`) the between-class variance is recomputed from scratch over the
/// bin-centre values. Returns the first maximizing cut, if any cut splits
/// the data into two non-empty classes.
pub fn otsu_cut_oracle(values: &[f64]) -> Option<usize> {
    let centre = |b: usize| (b as f64 + 0.5) / OTSU_BINS as f64;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..OTSU_BINS - 1 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = {
            let all: Vec<(bool, f64)> = values.iter().map(|&v| (otsu_bin(v) <= k, centre(otsu_bin(v)))).collect();
            (all.iter().filter(|x| x.0).map(|x| x.1).collect(), all.iter().filter(|x| !x.0).map(|x| x.1).collect())
        };
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let (w0, w1) = (lo.len() as f64 / n, hi.len() as f64 / n);
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        let var = w0 * w1 * (m0 - m1).powi(2);
        if best.is_none_or(|(_, b)| var > b * (1.0 + 1e-12)) {
            best = Some((k, var));
        }
    }
    best.map(|(k, _)| k)
}

/// Central finite-difference gradient of the candidate's loss with respect
/// to its six pose parameters.
pub fn fd_gradient(c: &CandidateBox, index: &SpatialIndex, probes: usize, h: f64) -> [f64; 6] {
    std::array::from_fn(|k| {
        let mut plus = c.clone();
        let mut minus = c.clone();
        let mut p = c.params;
        p[k] += h;
        plus.set_params(p);
        p[k] -= 2.0 * h;
        minus.set_params(p);
        (candidate_loss(&plus, index, probes) - candidate_loss(&minus, index, probes)) / (2.0 * h)
    })
}

/// Relative error with a floor so components that vanish by symmetry are
/// compared absolutely.
pub fn relative_error(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / got.abs().max(want.abs()).max(floor)
}

/// Axis boxes snapped to a `RES`-cell lattice over `[0, DOMAIN)³`.
pub const RES: usize = 256;
pub const DOMAIN: f64 = 4.0;

pub fn snapped_box(rng: &mut ChaCha8Rng) -> ([usize; 3], [usize; 3]) {
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for k in 0..3 {
        let a = rng.gen_range(0..RES - 8);
        let len = rng.gen_range(8..=(RES - a).min(160));
        lo[k] = a;
        hi[k] = a + len;
    }
    (lo, hi)
}

pub fn to_point(v: [usize; 3]) -> Point {
    let s = DOMAIN / RES as f64;
    Point::new(v[0] as f64 * s, v[1] as f64 * s, v[2] as f64 * s)
}

/// Voxel volumes of (union, intersection, difference) by scanning cell centres.
pub fn voxel_volumes(a: ([usize; 3], [usize; 3]), b: ([usize; 3], [usize; 3])) -> [f64; 3] {
    let inside = |bx: &([usize; 3], [usize; 3]), i: usize, j: usize, k: usize| {
        (bx.0[0]..bx.1[0]).contains(&i) && (bx.0[1]..bx.1[1]).contains(&j) && (bx.0[2]..bx.1[2]).contains(&k)
    };
    let mut counts = [0usize; 3];
    for i in 0..RES {
        for j in 0..RES {
            for k in 0..RES {
                let (ia, ib) = (inside(&a, i, j, k), inside(&b, i, j, k));
                counts[0] += (ia || ib) as usize;
                counts[1] += (ia && ib) as usize;
                counts[2] += (ia && !ib) as usize;
            }
        }
    }
    let cell = (DOMAIN / RES as f64).powi(3);
    counts.map(|c| c as f64 * cell)
}

/// Volume enclosed by `mesh` measured column by column: an `n × n` grid of
/// vertical rays over the footprint, each contributing the summed lengths
/// of its inside intervals (found by brute-force ray casting).
pub fn column_volume(mesh: &Mesh, n: usize) -> f64 {
    let b = mesh.aabb();
    let (dx, dy) = ((b.max.x - b.min.x) / n as f64, (b.max.y - b.min.y) / n as f64);
    let up = Vec3::z();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let o = Point::new(b.min.x + (i as f64 + 0.5) * dx, b.min.y + (j as f64 + 0.5) * dy, b.min.z - 1.0);
            let mut ts: Vec<f64> = (0..mesh.face_count())
                .filter_map(|f| {
                    let [a, bb, c] = mesh.triangle(f);
                    ray_triangle_oracle(&o, &up, &a, &bb, &c, 0.0)
                })
                .collect();
            ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            ts.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
            total += ts.chunks_exact(2).map(|p| p[1] - p[0]).sum::<f64>();
        }
    }
    total * dx * dy
}
