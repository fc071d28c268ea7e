//! Procedural meshes used as fixtures by tests, benchmarks and the demo.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Mesh, Point, Vec3};

/// Axis-aligned unit cube spanning `[0, 1]^3`, outward winding.
pub fn unit_cube() -> Mesh {
    axis_box(Point::origin(), Point::new(1.0, 1.0, 1.0))
}

/// Closed box with 12 triangles.
pub fn axis_box(min: Point, max: Point) -> Mesh {
    let v = vec![
        Point::new(min.x, min.y, min.z),
        Point::new(max.x, min.y, min.z),
        Point::new(max.x, max.y, min.z),
        Point::new(min.x, max.y, min.z),
        Point::new(min.x, min.y, max.z),
        Point::new(max.x, min.y, max.z),
        Point::new(max.x, max.y, max.z),
        Point::new(min.x, max.y, max.z),
    ];
    let f = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    Mesh::new(v, f).expect("valid box")
}

/// Closed box centered at the origin whose faces are regular grids with
/// cells of roughly `cell` size.
pub fn tessellated_box(size: Vec3, cell: f64) -> Mesh {
    let h = size / 2.0;
    let div = |len: f64| ((len / cell).round() as usize).max(1);
    let (nx, ny, nz) = (div(size.x), div(size.y), div(size.z));
    let mut parts = Vec::new();
    // Each face: origin corner, two spanning vectors (u × v points outward).
    let faces: [(Point, Vec3, Vec3, usize, usize); 6] = [
        (Point::new(-h.x, -h.y, h.z), Vec3::new(size.x, 0.0, 0.0), Vec3::new(0.0, size.y, 0.0), nx, ny),
        (Point::new(-h.x, -h.y, -h.z), Vec3::new(0.0, size.y, 0.0), Vec3::new(size.x, 0.0, 0.0), ny, nx),
        (Point::new(h.x, -h.y, -h.z), Vec3::new(0.0, size.y, 0.0), Vec3::new(0.0, 0.0, size.z), ny, nz),
        (Point::new(-h.x, -h.y, -h.z), Vec3::new(0.0, 0.0, size.z), Vec3::new(0.0, size.y, 0.0), nz, ny),
        (Point::new(-h.x, h.y, -h.z), Vec3::new(0.0, 0.0, size.z), Vec3::new(size.x, 0.0, 0.0), nz, nx),
        (Point::new(-h.x, -h.y, -h.z), Vec3::new(size.x, 0.0, 0.0), Vec3::new(0.0, 0.0, size.z), nx, nz),
    ];
    for (o, u, v, nu, nv) in faces {
        parts.push(grid_patch(o, u, v, nu, nv));
    }
    Mesh::concat(parts.iter()).welded(1e-9 * size.max())
}

/// Flat square patch of side `size` in the plane z = 0 centered at the
/// origin, `n` cells per side, normal +Z. Open surface.
pub fn plane_grid(size: f64, n: usize) -> Mesh {
    grid_patch(Point::new(-size / 2.0, -size / 2.0, 0.0), Vec3::new(size, 0.0, 0.0), Vec3::new(0.0, size, 0.0), n, n)
}

fn grid_patch(origin: Point, u: Vec3, v: Vec3, nu: usize, nv: usize) -> Mesh {
    let mut verts = Vec::with_capacity((nu + 1) * (nv + 1));
    for j in 0..=nv {
        for i in 0..=nu {
            verts.push(origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64));
        }
    }
    let idx = |i: usize, j: usize| j * (nu + 1) + i;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::new(verts, faces).expect("valid grid")
}

/// Geodesic sphere: each icosahedron face split into `freq^2` triangles and
/// projected onto the sphere. `10 freq^2 + 2` vertices, `20 freq^2` faces.
pub fn geodesic_sphere(radius: f64, freq: usize) -> Mesh {
    let freq = freq.max(1);
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        Vec3::new(-1.0, t, 0.0),
        Vec3::new(1.0, t, 0.0),
        Vec3::new(-1.0, -t, 0.0),
        Vec3::new(1.0, -t, 0.0),
        Vec3::new(0.0, -1.0, t),
        Vec3::new(0.0, 1.0, t),
        Vec3::new(0.0, -1.0, -t),
        Vec3::new(0.0, 1.0, -t),
        Vec3::new(t, 0.0, -1.0),
        Vec3::new(t, 0.0, 1.0),
        Vec3::new(-t, 0.0, -1.0),
        Vec3::new(-t, 0.0, 1.0),
    ];
    let tris: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for tri in tris {
        let (a, b, c) = (base[tri[0]], base[tri[1]], base[tri[2]]);
        let start = verts.len();
        // Row i has i + 1 points interpolated between a->b and a->c.
        let mut row_start = Vec::with_capacity(freq + 1);
        for i in 0..=freq {
            row_start.push(verts.len() - start);
            for j in 0..=i {
                let p = if i == 0 {
                    a
                } else {
                    let s = i as f64 / freq as f64;
                    let w = j as f64 / i as f64;
                    a + (b - a) * s * (1.0 - w) + (c - a) * s * w
                };
                verts.push(Point::from(p));
            }
        }
        let id = |i: usize, j: usize| start + row_start[i] + j;
        for i in 0..freq {
            for j in 0..=i {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                if j < i {
                    faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    let raw = Mesh::new(verts, faces).expect("valid sphere");
    let welded = raw.welded(1e-9);
    let m = welded.map_vertices(|p| Point::from(p.coords.normalize() * radius));
    if m.signed_volume() < 0.0 {
        m.flipped()
    } else {
        m
    }
}

/// Geodesic sphere with `4^levels` subdivision.
pub fn icosphere(radius: f64, levels: u32) -> Mesh {
    geodesic_sphere(radius, 1 << levels)
}

/// Latitude/longitude sphere with `(rings - 1) * segments + 2` vertices.
pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> Mesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut verts = vec![Point::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let th = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let ph = 2.0 * PI * s as f64 / segments as f64;
            verts.push(Point::new(radius * th.sin() * ph.cos(), radius * th.sin() * ph.sin(), radius * th.cos()));
        }
    }
    verts.push(Point::new(0.0, 0.0, -radius));
    let south = verts.len() - 1;
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + (s % segments);
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            faces.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
            faces.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    Mesh::new(verts, faces).expect("valid uv sphere")
}

/// Torus around the Z axis.
pub fn torus(major: f64, minor: f64, n_major: usize, n_minor: usize) -> Mesh {
    let mut verts = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let u = 2.0 * PI * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let v = 2.0 * PI * j as f64 / n_minor as f64;
            let r = major + minor * v.cos();
            verts.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut faces = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let m = Mesh::new(verts, faces).expect("valid torus");
    if m.signed_volume() < 0.0 {
        m.flipped()
    } else {
        m
    }
}

/// Unstructured triangle soup with `faces` random triangles.
pub fn random_soup(faces: usize, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = faces * 3;
    let verts = (0..n)
        .map(|_| Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
        .collect();
    let f = (0..faces).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    Mesh::new(verts, f).expect("valid soup")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_fixtures_are_watertight() {
        for (name, m) in [
            ("cube", unit_cube()),
            ("tbox", tessellated_box(Vec3::new(4.0, 3.0, 2.0), 0.5)),
            ("geo", geodesic_sphere(2.0, 5)),
            ("uv", uv_sphere(2.0, 12, 20)),
            ("torus", torus(5.0, 2.0, 24, 12)),
        ] {
            assert_eq!(m.boundary_edge_count(), 0, "{name}");
            assert!(m.signed_volume() > 0.0, "{name}");
        }
    }

    #[test]
    fn sphere_counts() {
        let s = geodesic_sphere(1.0, 16);
        assert_eq!(s.face_count(), 5120);
        assert_eq!(s.vertex_count(), 2562);
        let v = 4.0 / 3.0 * PI;
        assert!((s.signed_volume() - v).abs() / v < 0.01);
        let uv = uv_sphere(1.0, 10, 16);
        assert_eq!(uv.vertex_count(), 9 * 16 + 2);
    }

    #[test]
    fn tessellated_box_volume() {
        let b = tessellated_box(Vec3::new(30.0, 30.0, 2.0), 0.5);
        assert!((b.signed_volume() - 1800.0).abs() < 1e-6);
    }
}
