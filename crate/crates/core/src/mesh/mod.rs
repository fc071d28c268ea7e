//! Indexed triangle meshes and the queries the rest of the pipeline runs on them.

mod bvh;
pub mod geom;
mod obj;
mod sample;
mod topology;

pub use bvh::{ClosestHit, RayHit, SpatialIndex, RAY_EPS};
pub use geom::Aabb;
pub use obj::{parse_obj, write_obj};
pub use sample::{surface_sample, SurfacePoint};
pub use topology::{boundary_edge_count, connected_components, UnionFind};

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Default vertex weld tolerance in normalized model units.
pub const WELD_EPS: f64 = 1e-6;

/// Indexed triangle mesh with derived per-face and per-vertex attributes.
///
/// Faces are 0-based vertex index triples with counter-clockwise winding when
/// seen from outside.
#[derive(Clone, Debug, Default)]
pub struct Mesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
    vertex_normals: Vec<Vec3>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= count) {
                return Err(Error::IndexOutOfRange { face: fi, index, count });
            }
        }
        Ok(Self::from_parts_unchecked(vertices, faces))
    }

    pub(crate) fn from_parts_unchecked(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Self {
        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        let mut acc = vec![Vec3::zeros(); vertices.len()];
        for f in &faces {
            let cross = geom::triangle_cross(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            let len = cross.norm();
            face_areas.push(0.5 * len);
            face_normals.push(if len > 0.0 { cross / len } else { Vec3::zeros() });
            // Summing raw cross products weights by area.
            for &v in f {
                acc[v] += cross;
            }
        }
        let vertex_normals = acc
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
        Self { vertices, faces, face_normals, face_areas, vertex_normals }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// Area-weighted vertex normals. Vertices whose incident faces all have
    /// zero area (or that are unreferenced) get the zero vector.
    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    /// Indices of vertices without a defined normal.
    pub fn degenerate_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&i| self.vertex_normals[i] == Vec3::zeros()).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn face_aabb(&self, face: usize) -> Aabb {
        Aabb::from_points(&self.triangle(face))
    }

    /// Signed enclosed volume (divergence theorem). Positive for outward-facing
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let a = self.vertices[f[0]].coords;
                let b = self.vertices[f[1]].coords;
                let c = self.vertices[f[2]].coords;
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Mean of the vertex positions.
    pub fn vertex_centroid(&self) -> Point {
        if self.vertices.is_empty() {
            return Point::origin();
        }
        let sum = self.vertices.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / self.vertices.len() as f64)
    }

    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> Mesh {
        Mesh::from_parts_unchecked(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    pub fn translated(&self, offset: &Vec3) -> Mesh {
        self.map_vertices(|p| p + offset)
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Mesh {
        let faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        Mesh::from_parts_unchecked(self.vertices.clone(), faces)
    }

    /// Disjoint concatenation of several meshes.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a Mesh>) -> Mesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let base = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        }
        Mesh::from_parts_unchecked(vertices, faces)
    }

    /// Keeps only the listed faces and drops vertices no longer referenced.
    pub fn submesh(&self, keep: impl IntoIterator<Item = usize>) -> Mesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for fi in keep {
            let f = self.faces[fi];
            let mut nf = [0; 3];
            for k in 0..3 {
                let v = f[k];
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(self.vertices[v]);
                }
                nf[k] = remap[v];
            }
            faces.push(nf);
        }
        Mesh::from_parts_unchecked(vertices, faces)
    }

    /// Merges vertices closer than `eps` and drops faces that collapse.
    pub fn welded(&self, eps: f64) -> Mesh {
        let (rep, positions) = weld_vertices(&self.vertices, eps);
        let faces = self
            .faces
            .iter()
            .map(|f| [rep[f[0]], rep[f[1]], rep[f[2]]])
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        Mesh::from_parts_unchecked(positions, faces)
    }

    /// Number of directed edges without an opposite twin. Zero for closed,
    /// consistently oriented meshes.
    pub fn boundary_edge_count(&self) -> usize {
        boundary_edge_count(&self.faces)
    }

    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.boundary_edge_count() == 0
    }
}

/// Cell key of a uniform hash grid.
pub(crate) fn grid_key(p: &Point, cell: f64) -> (i64, i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
}

/// Clusters positions closer than `eps` (first-come representative) and
/// returns the per-input representative index plus the representative
/// positions. `eps == 0` merges bit-identical positions only.
pub(crate) fn weld_vertices(points: &[Point], eps: f64) -> (Vec<usize>, Vec<Point>) {
    let mut rep = Vec::with_capacity(points.len());
    let mut out: Vec<Point> = Vec::new();
    if eps <= 0.0 {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for p in points {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let idx = *seen.entry(key).or_insert_with(|| {
                out.push(*p);
                out.len() - 1
            });
            rep.push(idx);
        }
        return (rep, out);
    }
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let eps2 = eps * eps;
    for p in points {
        let (cx, cy, cz) = grid_key(p, eps);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in list {
                            if (out[i] - p).norm_squared() <= eps2 {
                                found = Some(i);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = match found {
            Some(i) => i,
            None => {
                out.push(*p);
                let i = out.len() - 1;
                grid.entry((cx, cy, cz)).or_default().push(i);
                i
            }
        };
        rep.push(idx);
    }
    (rep, out)
}

/// Centers the mesh on its bounding-box center and scales it uniformly so the
/// largest bounding-box extent equals `target_size`.
pub fn normalize_model(mesh: &Mesh, target_size: f64) -> Result<Mesh> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !(target_size > 0.0) {
        return Err(Error::InvalidArgument(format!("target size must be positive, got {target_size}")));
    }
    let bb = mesh.aabb();
    let extent = bb.extent().max();
    if !(extent > 0.0) {
        return Err(Error::Degenerate("zero bounding-box extent".into()));
    }
    let center = bb.center();
    let scale = target_size / extent;
    Ok(mesh.map_vertices(|p| Point::from((p - center) * scale)))
}

/// Vertex-clustering simplification: snaps vertices to a grid sized so that at
/// most roughly `max_vertices` cells are occupied, then drops collapsed faces.
pub fn cluster_decimate(mesh: &Mesh, max_vertices: usize) -> Mesh {
    if mesh.vertex_count() <= max_vertices || max_vertices == 0 {
        return mesh.clone();
    }
    let bb = mesh.aabb();
    let area = mesh.total_area().max(1e-12);
    // Surface meshes occupy about area / cell^2 cells.
    let mut cell = (area / max_vertices as f64).sqrt();
    loop {
        let mut cells: HashMap<(i64, i64, i64), usize> = HashMap::new();
        let mut sums: Vec<(Vec3, usize)> = Vec::new();
        let mut rep = Vec::with_capacity(mesh.vertex_count());
        for p in &mesh.vertices {
            let key = grid_key(&Point::from(p - bb.min), cell);
            let idx = *cells.entry(key).or_insert_with(|| {
                sums.push((Vec3::zeros(), 0));
                sums.len() - 1
            });
            sums[idx].0 += p.coords;
            sums[idx].1 += 1;
            rep.push(idx);
        }
        if sums.len() <= max_vertices {
            let vertices: Vec<Point> = sums.iter().map(|(s, n)| Point::from(s / *n as f64)).collect();
            let mut seen = std::collections::HashSet::new();
            let faces: Vec<[usize; 3]> = mesh
                .faces
                .iter()
                .map(|f| [rep[f[0]], rep[f[1]], rep[f[2]]])
                .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
                .filter(|f| {
                    let mut key = *f;
                    key.sort_unstable();
                    seen.insert(key)
                })
                .collect();
            let m = Mesh::from_parts_unchecked(vertices, faces);
            let used: Vec<usize> = (0..m.face_count()).collect();
            return m.submesh(used);
        }
        cell *= 1.25;
    }
}
