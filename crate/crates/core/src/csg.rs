//! Boolean operations on closed triangle meshes.
//!
//! Each face of one operand is cut by the planes of the faces of the other
//! operand that actually intersect it (coplanar overlaps are cut along the
//! other face's edges). Every resulting convex fragment is classified as
//! inside, outside, or coplanar with the other solid, kept or dropped
//! according to the operation, and the survivors are triangulated and welded.
//! A final pass splits edges at T-junctions left by cuts that end on an edge
//! shared with an uncut neighbour, so closed inputs give closed outputs.

use std::collections::HashMap;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::geom::TriangleFeature;
use crate::mesh::{boundary_edge_count, grid_key, weld_vertices, Aabb, Mesh, Point, SpatialIndex, Vec3, WELD_EPS};

/// Distance below which a point counts as lying on a cutting plane.
const PLANE_EPS: f64 = 1e-7;
/// Faces whose normals agree this closely are treated as parallel.
const PARALLEL_EPS: f64 = 1e-9;
/// Twice-area below which an output triangle is dropped.
const MIN_DOUBLE_AREA: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolOp {
    Union,
    Intersection,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    A,
    B,
}

/// Source face of an output face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceOrigin {
    pub operand: Operand,
    pub face: usize,
}

#[derive(Clone, Debug)]
pub struct CsgResult {
    pub mesh: Mesh,
    pub boundary_edge_count: usize,
    /// One entry per output face.
    pub origins: Vec<FaceOrigin>,
}

/// A closed operand with its acceleration structure, reusable across
/// several operations.
pub struct Solid<'a> {
    pub mesh: &'a Mesh,
    pub index: SpatialIndex,
}

impl<'a> Solid<'a> {
    /// Checks the mesh is closed and outward-oriented and indexes it.
    pub fn new(mesh: &'a Mesh, name: &'static str) -> Result<Self> {
        check_operand(mesh, name)?;
        Ok(Self { mesh, index: SpatialIndex::new(mesh) })
    }
}

fn check_operand(mesh: &Mesh, name: &'static str) -> Result<()> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let open = mesh.boundary_edge_count();
    if open > 0 {
        return Err(Error::NotWatertight { operand: name, boundary_edges: open });
    }
    if !(mesh.signed_volume() > 0.0) {
        return Err(Error::Degenerate(format!("operand {name} has non-positive volume")));
    }
    Ok(())
}

/// Set operation on two closed, outward-oriented meshes.
pub fn boolean_op(a: &Mesh, b: &Mesh, op: BoolOp) -> Result<CsgResult> {
    let sa = Solid::new(a, "a")?;
    let sb = Solid::new(b, "b")?;
    boolean_solids(&sa, &sb, op)
}

/// [`boolean_op`] on pre-indexed operands.
pub fn boolean_solids(a: &Solid<'_>, b: &Solid<'_>, op: BoolOp) -> Result<CsgResult> {
    let frags_a = fragments(a, b, Operand::A);
    let frags_b = fragments(b, a, Operand::B);
    let mut polys: Vec<(Vec<Point>, FaceOrigin)> = Vec::new();
    for (frags, operand) in [(frags_a, Operand::A), (frags_b, Operand::B)] {
        for f in frags {
            let keep = match (op, operand, f.class) {
                (_, _, Class::Ambiguous) => {
                    return Err(Error::Classification(format!(
                        "could not classify a fragment of face {} of operand {:?}",
                        f.origin.face, operand
                    )))
                }
                (BoolOp::Union, _, Class::Outside) => Keep::AsIs,
                (BoolOp::Union, Operand::A, Class::CoplanarSame) => Keep::AsIs,
                (BoolOp::Intersection, _, Class::Inside) => Keep::AsIs,
                (BoolOp::Intersection, Operand::A, Class::CoplanarSame) => Keep::AsIs,
                (BoolOp::Difference, Operand::A, Class::Outside) => Keep::AsIs,
                (BoolOp::Difference, Operand::A, Class::CoplanarOpposite) => Keep::AsIs,
                (BoolOp::Difference, Operand::B, Class::Inside) => Keep::Flipped,
                _ => Keep::Drop,
            };
            match keep {
                Keep::AsIs => polys.push((f.points, f.origin)),
                Keep::Flipped => {
                    let mut p = f.points;
                    p.reverse();
                    polys.push((p, f.origin));
                }
                Keep::Drop => {}
            }
        }
    }
    Ok(assemble(polys))
}

enum Keep {
    AsIs,
    Flipped,
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Inside,
    Outside,
    CoplanarSame,
    CoplanarOpposite,
    Ambiguous,
}

struct Fragment {
    points: Vec<Point>,
    origin: FaceOrigin,
    class: Class,
}

#[derive(Clone, Copy, Debug)]
struct Plane {
    n: Vec3,
    d: f64,
}

impl Plane {
    fn through(n: Vec3, p: &Point) -> Self {
        Self { n, d: n.dot(&p.coords) }
    }

    fn dist(&self, p: &Point) -> f64 {
        self.n.dot(&p.coords) - self.d
    }

    fn same_as(&self, o: &Plane) -> bool {
        let c = self.n.dot(&o.n);
        if c > 1.0 - 1e-12 {
            (self.d - o.d).abs() < 1e-10
        } else if c < -1.0 + 1e-12 {
            (self.d + o.d).abs() < 1e-10
        } else {
            false
        }
    }
}

/// Fragments of every face of `s` with respect to `other`.
fn fragments(s: &Solid<'_>, other: &Solid<'_>, operand: Operand) -> Vec<Fragment> {
    let other_box = other.index.bounds().expanded(PLANE_EPS * 10.0);
    let per_face: Vec<Vec<Fragment>> = (0..s.mesh.face_count())
        .into_par_iter()
        .map(|fi| {
            let origin = FaceOrigin { operand, face: fi };
            let tri = s.mesh.triangle(fi);
            let fbox = s.mesh.face_aabb(fi);
            if !fbox.overlaps(&other_box) {
                return vec![Fragment { points: tri.to_vec(), origin, class: Class::Outside }];
            }
            let normal = s.mesh.face_normals()[fi];
            let planes = cutting_planes(&tri, &normal, &fbox, other);
            let mut polys = vec![tri.to_vec()];
            for pl in &planes {
                let mut next = Vec::with_capacity(polys.len() + 1);
                for poly in polys {
                    split_polygon(poly, pl, &mut next);
                }
                polys = next;
            }
            polys
                .into_iter()
                .filter(|p| p.len() >= 3)
                .map(|points| {
                    let class = classify(&centroid(&points), &normal, other);
                    Fragment { points, origin, class }
                })
                .collect()
        })
        .collect();
    per_face.into_iter().flatten().collect()
}

fn centroid(points: &[Point]) -> Point {
    let s = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Point::from(s / points.len() as f64)
}

/// Planes of the faces of `other` that intersect the triangle; for
/// coplanar overlapping faces, the planes through their edges.
fn cutting_planes(tri: &[Point; 3], normal: &Vec3, fbox: &Aabb, other: &Solid<'_>) -> Vec<Plane> {
    let own = Plane::through(*normal, &tri[0]);
    let mut planes: Vec<Plane> = Vec::new();
    let push = |p: Plane, planes: &mut Vec<Plane>| {
        if !p.same_as(&own) && !planes.iter().any(|q| q.same_as(&p)) {
            planes.push(p);
        }
    };
    for gi in other.index.faces_in_aabb(&fbox.expanded(PLANE_EPS)) {
        let g = other.mesh.triangle(gi);
        let gn = other.mesh.face_normals()[gi];
        if gn.norm_squared() == 0.0 {
            continue;
        }
        match tri_tri_relation(tri, normal, &g, &gn) {
            Relation::Disjoint => {}
            Relation::Crossing => push(Plane::through(gn, &g[0]), &mut planes),
            Relation::Coplanar => {
                for k in 0..3 {
                    let e = g[(k + 1) % 3] - g[k];
                    let n = gn.cross(&e);
                    let len = n.norm();
                    if len > 0.0 {
                        push(Plane::through(n / len, &g[k]), &mut planes);
                    }
                }
            }
        }
    }
    planes
}

enum Relation {
    Disjoint,
    Crossing,
    Coplanar,
}

/// Interval-overlap triangle intersection test.
fn tri_tri_relation(f: &[Point; 3], fnormal: &Vec3, g: &[Point; 3], gnormal: &Vec3) -> Relation {
    let pf = Plane::through(*fnormal, &f[0]);
    let pg = Plane::through(*gnormal, &g[0]);
    let dg = g.map(|p| pf.dist(&p));
    let df = f.map(|p| pg.dist(&p));
    let side = |d: &[f64; 3]| {
        if d.iter().all(|&x| x > PLANE_EPS) || d.iter().all(|&x| x < -PLANE_EPS) {
            Some(())
        } else {
            None
        }
    };
    if side(&dg).is_some() || side(&df).is_some() {
        return Relation::Disjoint;
    }
    if dg.iter().all(|x| x.abs() <= PLANE_EPS) || fnormal.cross(gnormal).norm() < PARALLEL_EPS {
        if dg.iter().all(|x| x.abs() <= PLANE_EPS) {
            let fb = Aabb::from_points(f.iter()).expanded(PLANE_EPS);
            let gb = Aabb::from_points(g.iter());
            return if fb.overlaps(&gb) { Relation::Coplanar } else { Relation::Disjoint };
        }
        return Relation::Disjoint;
    }
    let dir = fnormal.cross(gnormal);
    let (Some(a), Some(b)) = (line_interval(f, &df, &dir), line_interval(g, &dg, &dir)) else {
        return Relation::Disjoint;
    };
    let tol = PLANE_EPS * dir.norm().max(1.0) * 10.0;
    if a.1 < b.0 - tol || b.1 < a.0 - tol {
        return Relation::Disjoint;
    }
    // Touching at a single point or along an edge lying in the other plane
    // still produces a useful cut only if it separates part of the face.
    Relation::Crossing
}

/// Extent of the triangle's intersection with the other plane, projected
/// onto `dir`. `d` are the vertices' signed distances to that plane.
fn line_interval(t: &[Point; 3], d: &[f64; 3], dir: &Vec3) -> Option<(f64, f64)> {
    let mut vals: Vec<f64> = Vec::with_capacity(3);
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        if d[i].abs() <= PLANE_EPS {
            vals.push(dir.dot(&t[i].coords));
        }
        if (d[i] > PLANE_EPS && d[j] < -PLANE_EPS) || (d[i] < -PLANE_EPS && d[j] > PLANE_EPS) {
            let p = edge_cut(&t[i], &t[j], d[i], d[j]);
            vals.push(dir.dot(&p.coords));
        }
    }
    if vals.is_empty() {
        return None;
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

/// Point where segment `pq` crosses a plane, computed with a canonical
/// endpoint order so both sides of a shared edge produce the same bits.
fn edge_cut(p: &Point, q: &Point, dp: f64, dq: f64) -> Point {
    let swap = (q.x, q.y, q.z) < (p.x, p.y, p.z);
    let (a, b, da, db) = if swap { (q, p, dq, dp) } else { (p, q, dp, dq) };
    let t = da / (da - db);
    a + (b - a) * t
}

/// Splits a convex polygon by a plane, appending the pieces.
fn split_polygon(poly: Vec<Point>, plane: &Plane, out: &mut Vec<Vec<Point>>) {
    let d: Vec<f64> = poly.iter().map(|p| plane.dist(p)).collect();
    let front = d.iter().any(|&x| x > PLANE_EPS);
    let back = d.iter().any(|&x| x < -PLANE_EPS);
    if !(front && back) {
        out.push(poly);
        return;
    }
    let mut f = Vec::with_capacity(poly.len() + 1);
    let mut b = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let j = (i + 1) % n;
        let (pi, di, dj) = (poly[i], d[i], d[j]);
        if di > PLANE_EPS {
            f.push(pi);
        } else if di < -PLANE_EPS {
            b.push(pi);
        } else {
            f.push(pi);
            b.push(pi);
        }
        if (di > PLANE_EPS && dj < -PLANE_EPS) || (di < -PLANE_EPS && dj > PLANE_EPS) {
            let x = edge_cut(&pi, &poly[j], di, dj);
            f.push(x);
            b.push(x);
        }
    }
    if f.len() >= 3 {
        out.push(f);
    }
    if b.len() >= 3 {
        out.push(b);
    }
}

/// Ray directions for parity votes; generic so they avoid mesh edges.
/// (The 0.7071 component only resembles 1/√2 by coincidence.)
#[allow(clippy::approx_constant)]
const PARITY_DIRS: [[f64; 3]; 3] = [
    [0.534_522_483_8, 0.267_261_241_9, 0.801_783_725_7],
    [-0.613_940_613_9, 0.707_106_781_2, 0.350_823_207_9],
    [0.182_574_185_8, -0.912_870_929_2, -0.365_148_371_7],
];

/// Position of a fragment (given by its centroid and face normal) relative
/// to a closed solid.
fn classify(c: &Point, normal: &Vec3, other: &Solid<'_>) -> Class {
    if !c.coords.iter().all(|x| x.is_finite()) {
        return Class::Ambiguous;
    }
    if !other.index.bounds().expanded(PLANE_EPS * 10.0).contains(c) {
        return Class::Outside;
    }
    let Some((hit, n)) = other.index.closest_point_with_normal(c) else {
        return Class::Outside;
    };
    if hit.distance <= PLANE_EPS {
        let dot = normal.dot(&n);
        if dot > 1.0 - 1e-6 {
            return Class::CoplanarSame;
        }
        if dot < -1.0 + 1e-6 {
            return Class::CoplanarOpposite;
        }
    }
    if hit.distance > PLANE_EPS && hit.feature == TriangleFeature::Face {
        return if (c - hit.point).dot(&n) < 0.0 { Class::Inside } else { Class::Outside };
    }
    let mut inside_votes = 0;
    for d in PARITY_DIRS {
        let dir = Vec3::new(d[0], d[1], d[2]).normalize();
        if other.index.ray_crossings(c, &dir) % 2 == 1 {
            inside_votes += 1;
        }
    }
    if inside_votes == 1 || inside_votes == 2 {
        debug!("split parity vote ({inside_votes}/3) at {c:?}");
    }
    if inside_votes >= 2 {
        Class::Inside
    } else {
        Class::Outside
    }
}

/// Coarser weld tolerances tried when the first assembly is not closed.
const FALLBACK_WELDS: [f64; 2] = [1e-5, 1e-4];

/// Triangulates, welds, drops degenerate faces and repairs T-junctions.
fn assemble(polys: Vec<(Vec<Point>, FaceOrigin)>) -> CsgResult {
    let mut points = Vec::new();
    let mut tris: Vec<([usize; 3], FaceOrigin)> = Vec::new();
    for (poly, origin) in &polys {
        let base = points.len();
        points.extend_from_slice(poly);
        for k in 1..poly.len() - 1 {
            tris.push(([base, base + k, base + k + 1], *origin));
        }
    }
    let (rep, vertices) = weld_vertices(&points, WELD_EPS);
    let mut faces = Vec::with_capacity(tris.len());
    let mut origins = Vec::with_capacity(tris.len());
    for (t, o) in tris {
        let f = [rep[t[0]], rep[t[1]], rep[t[2]]];
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            continue;
        }
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if (b - a).cross(&(c - a)).norm() < MIN_DOUBLE_AREA {
            continue;
        }
        faces.push(f);
        origins.push(o);
    }
    repair_t_junctions(&vertices, &mut faces, &mut origins);
    let mut open = boundary_edge_count(&faces);
    let mut vertices = vertices;
    // Near-degenerate contacts can leave slivers a few ulps above the weld
    // tolerance; retry with coarser welds and keep the first closed result.
    for eps in FALLBACK_WELDS {
        if open == 0 {
            break;
        }
        let (v2, mut f2, mut o2) = reweld(&vertices, &faces, &origins, eps);
        repair_t_junctions(&v2, &mut f2, &mut o2);
        let open2 = boundary_edge_count(&f2);
        if open2 < open {
            debug!("coarse weld {eps:e} reduced open edges {open} -> {open2}");
            vertices = v2;
            faces = f2;
            origins = o2;
            open = open2;
        }
    }
    let mesh = Mesh::from_parts_unchecked(vertices, faces).submesh(0..origins.len());
    let boundary_edge_count = mesh.boundary_edge_count();
    CsgResult { mesh, boundary_edge_count, origins }
}

/// Merges vertices closer than `eps`, dropping faces that collapse and
/// pairs of faces that cancel (same vertices, opposite winding).
fn reweld(
    vertices: &[Point],
    faces: &[[usize; 3]],
    origins: &[FaceOrigin],
    eps: f64,
) -> (Vec<Point>, Vec<[usize; 3]>, Vec<FaceOrigin>) {
    let (rep, positions) = weld_vertices(vertices, eps);
    let mapped: Vec<[usize; 3]> = faces.iter().map(|f| [rep[f[0]], rep[f[1]], rep[f[2]]]).collect();
    // Canonical rotation with the smallest index first keeps the winding.
    let canon = |f: &[usize; 3]| {
        let k = (0..3).min_by_key(|&k| f[k]).unwrap_or(0);
        [f[k], f[(k + 1) % 3], f[(k + 2) % 3]]
    };
    let mut count: HashMap<[usize; 3], i64> = HashMap::new();
    for f in &mapped {
        if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
            *count.entry(canon(f)).or_insert(0) += 1;
        }
    }
    let mut out_f = Vec::with_capacity(mapped.len());
    let mut out_o = Vec::with_capacity(mapped.len());
    for (f, o) in mapped.iter().zip(origins) {
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            continue;
        }
        let c = canon(f);
        let opposite = canon(&[f[0], f[2], f[1]]);
        if count.get(&opposite).copied().unwrap_or(0) > 0 {
            continue;
        }
        let n = count.get_mut(&c).expect("counted");
        if *n > 1 {
            // Keep one of several identical faces.
            *n -= 1;
            continue;
        }
        out_f.push(*f);
        out_o.push(*o);
    }
    (positions, out_f, out_o)
}

fn unmatched_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: HashMap<(usize, usize), i64> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            *count.entry((u, v)).or_insert(0) += 1;
            *count.entry((v, u)).or_insert(0) -= 1;
        }
    }
    let mut out = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            if count[&(u, v)] > 0 {
                out.push((fi, k));
            }
        }
    }
    out
}

/// Splits faces along open edges at open-boundary vertices lying on them.
fn repair_t_junctions(vertices: &[Point], faces: &mut Vec<[usize; 3]>, origins: &mut Vec<FaceOrigin>) {
    for _round in 0..8 {
        let open = unmatched_edges(faces);
        if open.is_empty() {
            return;
        }
        // Candidate split vertices: endpoints of open edges.
        let mut cand: Vec<usize> = open.iter().flat_map(|&(fi, k)| [faces[fi][k], faces[fi][(k + 1) % 3]]).collect();
        cand.sort_unstable();
        cand.dedup();
        let mean_len =
            open.iter().map(|&(fi, k)| (vertices[faces[fi][k]] - vertices[faces[fi][(k + 1) % 3]]).norm()).sum::<f64>()
                / open.len() as f64;
        let cell = mean_len.max(WELD_EPS * 10.0);
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for &v in &cand {
            grid.entry(grid_key(&vertices[v], cell)).or_default().push(v);
        }
        let mut splits: HashMap<usize, Vec<(usize, Vec<usize>)>> = HashMap::new();
        for &(fi, k) in &open {
            let (u, v) = (faces[fi][k], faces[fi][(k + 1) % 3]);
            let (pu, pv) = (vertices[u], vertices[v]);
            let e = pv - pu;
            let len2 = e.norm_squared();
            if len2 == 0.0 {
                continue;
            }
            let bb = Aabb::from_points([pu, pv].iter()).expanded(WELD_EPS);
            let (lo, hi) = (grid_key(&bb.min, cell), grid_key(&bb.max, cell));
            let mut on: Vec<(f64, usize)> = Vec::new();
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        let Some(list) = grid.get(&(x, y, z)) else { continue };
                        for &w in list {
                            if w == u || w == v {
                                continue;
                            }
                            let t = (vertices[w] - pu).dot(&e) / len2;
                            if t <= 0.0 || t >= 1.0 {
                                continue;
                            }
                            let foot = pu + e * t;
                            if (vertices[w] - foot).norm() <= WELD_EPS {
                                on.push((t, w));
                            }
                        }
                    }
                }
            }
            if !on.is_empty() {
                on.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                splits.entry(fi).or_default().push((k, on.into_iter().map(|(_, w)| w).collect()));
            }
        }
        if splits.is_empty() {
            return;
        }
        let mut new_faces = Vec::with_capacity(faces.len() + splits.len() * 2);
        let mut new_origins = Vec::with_capacity(new_faces.capacity());
        for (fi, f) in faces.iter().enumerate() {
            match splits.get(&fi) {
                None => {
                    new_faces.push(*f);
                    new_origins.push(origins[fi]);
                }
                Some(edges) => {
                    // Polygon of the face with the extra vertices inserted,
                    // fan-triangulated from a corner not on a split edge
                    // when possible.
                    // A point near a sharp corner can lie on two edges;
                    // it is inserted once.
                    let mut poly = Vec::new();
                    for k in 0..3 {
                        poly.push(f[k]);
                        if let Some((_, ws)) = edges.iter().find(|(ek, _)| *ek == k) {
                            for &w in ws {
                                if !poly.contains(&w) && !f.contains(&w) {
                                    poly.push(w);
                                }
                            }
                        }
                    }
                    for tri in triangulate_fan(&poly, f, edges, vertices) {
                        if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                            new_faces.push(tri);
                            new_origins.push(origins[fi]);
                        }
                    }
                }
            }
        }
        *faces = new_faces;
        *origins = new_origins;
    }
}

/// Fans a triangle polygon (corners plus points inserted on its edges)
/// from the corner opposite the most subdivided edge.
fn triangulate_fan(
    poly: &[usize],
    f: &[usize; 3],
    edges: &[(usize, Vec<usize>)],
    vertices: &[Point],
) -> Vec<[usize; 3]> {
    // A corner's fan is free of slivers if neither adjacent edge was split.
    let split_edge = |k: usize| edges.iter().any(|(ek, _)| *ek == k);
    let apex_corner = (0..3)
        .find(|&c| !split_edge(c) && !split_edge((c + 2) % 3))
        .unwrap_or_else(|| (0..3).find(|&c| !split_edge((c + 1) % 3)).unwrap_or(0));
    let start = poly.iter().position(|&v| v == f[apex_corner]).unwrap_or(0);
    let n = poly.len();
    let mut out = Vec::with_capacity(n - 2);
    if !split_edge(apex_corner) && !split_edge((apex_corner + 2) % 3) {
        for i in 1..n - 1 {
            out.push([poly[start], poly[(start + i) % n], poly[(start + i + 1) % n]]);
        }
        return out;
    }
    // Every corner touches a split edge: triangulate around the centroid-free
    // ear clipping of a convex polygon with collinear runs.
    ear_clip(poly, vertices)
}

/// Ear clipping for a planar polygon whose vertices may include collinear runs.
fn ear_clip(poly: &[usize], vertices: &[Point]) -> Vec<[usize; 3]> {
    let mut idx: Vec<usize> = poly.to_vec();
    let mut out = Vec::new();
    let normal = {
        let mut n = Vec3::zeros();
        for i in 0..idx.len() {
            let (a, b) = (vertices[idx[i]], vertices[idx[(i + 1) % idx.len()]]);
            n += a.coords.cross(&b.coords);
        }
        n
    };
    let mut guard = 0;
    while idx.len() > 3 && guard < 10_000 {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (a, b, c) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let cross = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[b]));
            if cross.dot(&normal) > MIN_DOUBLE_AREA {
                out.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

/// Per output face: `None` for target faces, `Some((operand, face))` for
/// faces taken from an operand.
pub type Provenance = Vec<Option<(usize, usize)>>;

/// Union of several closed meshes into `target`; see [`fold_many`].
pub fn union_many(target: &Mesh, operands: &[Mesh]) -> Result<(Mesh, Provenance)> {
    fold_many(target, operands, BoolOp::Union)
}

/// Applies `op` between `target` and every operand in turn. Operands whose
/// bounding boxes are pairwise disjoint are merged into one operand per
/// pass. Returns the result and its face provenance.
pub fn fold_many(target: &Mesh, operands: &[Mesh], op: BoolOp) -> Result<(Mesh, Provenance)> {
    let mut current = target.clone();
    let mut prov: Provenance = vec![None; target.face_count()];
    let mut remaining: Vec<usize> = (0..operands.len()).collect();
    while !remaining.is_empty() {
        let mut batch: Vec<usize> = Vec::new();
        let mut boxes: Vec<Aabb> = Vec::new();
        let mut rest = Vec::new();
        for &i in &remaining {
            let bb = operands[i].aabb().expanded(WELD_EPS * 10.0);
            if boxes.iter().all(|b| !b.overlaps(&bb)) {
                boxes.push(bb);
                batch.push(i);
            } else {
                rest.push(i);
            }
        }
        remaining = rest;
        let parts: Vec<&Mesh> = batch.iter().map(|&i| &operands[i]).collect();
        let combined = Mesh::concat(parts.iter().copied());
        // Face offsets of each operand inside the combined mesh.
        let mut offsets = Vec::with_capacity(batch.len());
        let mut acc = 0;
        for p in &parts {
            offsets.push(acc);
            acc += p.face_count();
        }
        let res = boolean_op(&current, &combined, op)?;
        let mut next_prov = Vec::with_capacity(res.origins.len());
        for o in &res.origins {
            next_prov.push(match o.operand {
                Operand::A => prov[o.face],
                Operand::B => {
                    let k = offsets.partition_point(|&off| off <= o.face) - 1;
                    Some((batch[k], o.face - offsets[k]))
                }
            });
        }
        current = res.mesh;
        prov = next_prov;
    }
    Ok((current, prov))
}
