//! Watermark quality and asset utility metrics.
//!
//! * WPS — how much of each box's front face is covered by surface lying
//!   inside the box.
//! * Ray — fraction of camera views from which some facing watermark is
//!   unobstructed.
//! * SMSE — mean squared distance from the watermarked surface to the
//!   original surface.
//! * IPE — change in the number of connected parts.
//! * LCE — variance of the distances from watermark top vertices to the
//!   original surface; zero when the watermark follows the surface exactly.
//! * SE — fraction of boxes landing on salient regions, using a
//!   curvature-magnitude saliency proxy thresholded by Otsu's method.

use std::collections::{BTreeSet, HashSet};

use log::warn;
use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyph::BoxGeom;
use crate::labels::FaceLabel;
use crate::mesh::{
    connected_components, surface_sample, weld_vertices, Aabb, Mesh, Point, SpatialIndex, Vec3, WELD_EPS,
};

/// Offset of visibility ray origins above the box front face.
const RAY_LIFT: f64 = 1e-4;
/// Half-angle of the cone in which a watermark counts as facing a view.
pub const VIEW_CONE_DEG: f64 = 45.0;

/// Camera directions obtained by rotating the reference direction +Y about
/// the X axis and about the Z axis in fixed increments, duplicates removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSet {
    pub directions: Vec<Vec3>,
}

impl ViewSet {
    pub fn new(increment_deg: f64) -> Result<Self> {
        if !(increment_deg > 0.0) || (360.0 / increment_deg).fract().abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("angle increment must divide 360, got {increment_deg}")));
        }
        let steps = (360.0 / increment_deg).round() as usize;
        let reference = Vec3::y();
        let mut directions: Vec<Vec3> = Vec::with_capacity(2 * steps);
        for axis in [Vec3::x_axis(), Vec3::z_axis()] {
            for k in 0..steps {
                let angle = (k as f64 * increment_deg).to_radians();
                let d = Rotation3::from_axis_angle(&axis, angle) * reference;
                if directions.iter().all(|e| (e - d).norm() > 1e-9) {
                    directions.push(d);
                }
            }
        }
        Ok(Self { directions })
    }

    pub fn from_directions(directions: Vec<Vec3>) -> Self {
        Self { directions: directions.into_iter().map(|d| d.normalize()).collect() }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Diagnostics for one watermark box.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WatermarkDiagnostics {
    pub placement_ratio: Option<f64>,
    /// Per view: `None` when the watermark does not face the view, else
    /// whether all of its rays were unobstructed.
    pub visibility: Vec<Option<bool>>,
    pub curvature_variance: Option<f64>,
    pub saliency_vote: Option<bool>,
}

/// All metrics of one evaluation. Metrics that could not be computed for the
/// given inputs are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub wps: Option<f64>,
    pub ray: Option<f64>,
    pub smse: Option<f64>,
    pub ipe: Option<usize>,
    pub lce: Option<f64>,
    pub se: Option<f64>,
    pub per_watermark: Vec<WatermarkDiagnostics>,
    pub views: Vec<[f64; 3]>,
    pub h_f: usize,
}

impl MetricsReport {
    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let rows = [
            ("WPS", fmt(self.wps)),
            ("Ray", fmt(self.ray)),
            ("SMSE", fmt(self.smse)),
            ("IPE", self.ipe.map_or("n/a".into(), |v| v.to_string())),
            ("LCE", fmt(self.lce)),
            ("SE", fmt(self.se)),
            ("H_f", self.h_f.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<6}{v:>14}\n"));
        }
        out
    }
}

/// Mesh vertices (referenced by faces) that lie inside the box, sorted.
pub fn vertices_in_box(mesh: &Mesh, index: &SpatialIndex, geom: &BoxGeom) -> Vec<usize> {
    let region = Aabb::from_points(geom.corners().iter());
    let mut set = BTreeSet::new();
    for f in index.faces_in_aabb(&region) {
        for &v in &mesh.faces()[f] {
            if geom.contains(&mesh.vertices()[v], 1e-12) {
                set.insert(v);
            }
        }
    }
    set.into_iter().collect()
}

/// Projected area of the faces lying entirely inside the box, divided by
/// the front-face area and clamped to at most 1.
pub fn placement_ratio(target: &Mesh, index: &SpatialIndex, geom: &BoxGeom) -> f64 {
    let region = Aabb::from_points(geom.corners().iter());
    let n = geom.front_normal();
    let mut area = 0.0;
    for f in index.faces_in_aabb(&region) {
        let inside = target.faces()[f].iter().all(|&v| geom.contains(&target.vertices()[v], 1e-12));
        if inside {
            area += target.face_areas()[f] * target.face_normals()[f].dot(&n).abs();
        }
    }
    (area / geom.front_area()).min(1.0)
}

/// Mean placement ratio over the boxes.
pub fn wps(target: &Mesh, boxes: &[BoxGeom]) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::InvalidArgument("WPS needs at least one box".into()));
    }
    let index = SpatialIndex::new(target);
    let sum: f64 = boxes.iter().map(|b| placement_ratio(target, &index, b)).sum();
    Ok(sum / boxes.len() as f64)
}

fn cone_cos() -> f64 {
    VIEW_CONE_DEG.to_radians().cos()
}

/// Whether `n_rays` random rays from the box front face toward `dir` all
/// escape the mesh.
pub fn watermark_unobstructed(index: &SpatialIndex, geom: &BoxGeom, dir: &Vec3, n_rays: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = geom.half_extents;
    let lift = geom.front_normal() * RAY_LIFT;
    (0..n_rays.max(1)).all(|_| {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let v: f64 = rng.gen_range(-1.0..=1.0);
        let origin = geom.to_world(&Vec3::new(u * h.x, v * h.y, h.z)) + lift;
        index.ray_intersect(&origin, dir).is_none()
    })
}

/// Per-view visibility matrix: `[view][box]`.
pub fn visibility_matrix(
    index: &SpatialIndex,
    boxes: &[BoxGeom],
    views: &ViewSet,
    n_rays: usize,
    seed: u64,
) -> Vec<Vec<Option<bool>>> {
    let cc = cone_cos();
    views
        .directions
        .par_iter()
        .enumerate()
        .map(|(vi, d)| {
            boxes
                .iter()
                .enumerate()
                .map(|(bi, b)| {
                    (b.front_normal().dot(d) >= cc - 1e-12).then(|| {
                        let s = seed ^ ((vi as u64) << 32) ^ (bi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                        watermark_unobstructed(index, b, d, n_rays, s)
                    })
                })
                .collect()
        })
        .collect()
}

/// Mean over views of the fraction of facing watermarks that are fully
/// unobstructed (0 for views without a facing watermark).
pub fn ray_visibility(watermarked: &Mesh, boxes: &[BoxGeom], views: &ViewSet, n_rays: usize, seed: u64) -> f64 {
    if views.is_empty() {
        return 0.0;
    }
    let index = SpatialIndex::new(watermarked);
    ray_score(&visibility_matrix(&index, boxes, views, n_rays, seed))
}

fn ray_score(matrix: &[Vec<Option<bool>>]) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    let total: f64 = matrix
        .iter()
        .map(|row| {
            let facing: Vec<bool> = row.iter().flatten().copied().collect();
            if facing.is_empty() {
                0.0
            } else {
                facing.iter().filter(|&&v| v).count() as f64 / facing.len() as f64
            }
        })
        .sum();
    total / matrix.len() as f64
}

/// Mean squared distance from samples on `watermarked` to `original`.
pub fn smse(original: &Mesh, watermarked: &Mesh, n_samples: usize, seed: u64) -> Result<f64> {
    if original.is_empty() || watermarked.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n_samples == 0 {
        return Ok(0.0);
    }
    let samples = surface_sample(watermarked, n_samples, seed)?;
    let index = SpatialIndex::new(original);
    let d2: Vec<f64> =
        samples.par_iter().map(|s| index.closest_point(&s.position).map_or(0.0, |h| h.distance * h.distance)).collect();
    Ok(d2.iter().sum::<f64>() / d2.len() as f64)
}

/// Absolute change in connected-component count.
pub fn ipe(original: &Mesh, watermarked: &Mesh) -> usize {
    let (a, _) = connected_components(original, WELD_EPS);
    let (b, _) = connected_components(watermarked, WELD_EPS);
    a.abs_diff(b)
}

/// Distances from each top-face vertex of watermark `filter` (or of all
/// watermarks) to the original surface.
fn top_distances(original: &Mesh, watermarked: &Mesh, labels: &[FaceLabel], filter: Option<usize>) -> Vec<f64> {
    let mut verts = BTreeSet::new();
    for (f, l) in watermarked.faces().iter().zip(labels) {
        if l.is_top() && (filter.is_none() || l.watermark_index() == filter) {
            verts.extend(f.iter().copied());
        }
    }
    let index = SpatialIndex::new(original);
    let verts: Vec<usize> = verts.into_iter().collect();
    verts.par_iter().map(|&v| index.closest_point(&watermarked.vertices()[v]).map_or(0.0, |h| h.distance)).collect()
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Population variance of the distances from all watermark top vertices to
/// the original surface.
pub fn lce(original: &Mesh, watermarked: &Mesh, labels: &[FaceLabel]) -> Result<f64> {
    if labels.len() != watermarked.face_count() {
        return Err(Error::InvalidArgument(format!("{} labels for {} faces", labels.len(), watermarked.face_count())));
    }
    let d = top_distances(original, watermarked, labels, None);
    if d.is_empty() {
        return Err(Error::InvalidWatermark("mesh has no watermark top faces".into()));
    }
    Ok(variance(&d))
}

/// Variance of top-vertex distances for one watermark, if it has top faces.
pub fn lce_for(original: &Mesh, watermarked: &Mesh, labels: &[FaceLabel], watermark: usize) -> Option<f64> {
    let d = top_distances(original, watermarked, labels, Some(watermark));
    (!d.is_empty()).then(|| variance(&d))
}

/// Vertex adjacency of a mesh after welding coincident vertices.
struct WeldedTopology {
    rep: Vec<usize>,
    positions: Vec<Point>,
    faces: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
}

impl WeldedTopology {
    fn new(mesh: &Mesh) -> Self {
        let (rep, positions) = weld_vertices(mesh.vertices(), WELD_EPS);
        let faces: Vec<[usize; 3]> = mesh
            .faces()
            .iter()
            .map(|f| [rep[f[0]], rep[f[1]], rep[f[2]]])
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); positions.len()];
        for f in &faces {
            for k in 0..3 {
                sets[f[k]].insert(f[(k + 1) % 3]);
                sets[f[k]].insert(f[(k + 2) % 3]);
            }
        }
        let neighbors = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Self { rep, positions, faces, neighbors }
    }
}

/// Per-vertex saliency proxy in `[0, 1]`: magnitude of the cotangent
/// Laplacian along the vertex normal (mean curvature), Gaussian-smoothed over
/// the two-ring and divided by its maximum. A flat mesh maps to all zeros.
pub fn saliency_map(mesh: &Mesh) -> Vec<f64> {
    if mesh.is_empty() {
        return vec![0.0; mesh.vertex_count()];
    }
    let topo = WeldedTopology::new(mesh);
    let n = topo.positions.len();
    let p = &topo.positions;
    let mut lap = vec![Vec3::zeros(); n];
    let mut area = vec![0.0; n];
    let mut normal = vec![Vec3::zeros(); n];
    for f in &topo.faces {
        let [a, b, c] = [p[f[0]], p[f[1]], p[f[2]]];
        let cross = (b - a).cross(&(c - a));
        let twice_area = cross.norm();
        if twice_area <= 0.0 {
            continue;
        }
        for k in 0..3 {
            area[f[k]] += twice_area / 6.0;
            normal[f[k]] += cross;
        }
        // Cotangent of the angle at each corner weights the opposite edge.
        for k in 0..3 {
            let (i, j, o) = (f[(k + 1) % 3], f[(k + 2) % 3], f[k]);
            let u = p[i] - p[o];
            let v = p[j] - p[o];
            let cot = u.dot(&v) / twice_area;
            lap[i] += (p[j] - p[i]) * cot;
            lap[j] += (p[i] - p[j]) * cot;
        }
    }
    let curvature: Vec<f64> = (0..n)
        .map(|i| {
            let nn = normal[i].norm();
            if area[i] <= 0.0 || nn <= 0.0 {
                0.0
            } else {
                (lap[i].dot(&(normal[i] / nn))).abs() / (4.0 * area[i])
            }
        })
        .collect();
    let edge_sum: f64 =
        topo.faces.iter().map(|f| (0..3).map(|k| (p[f[k]] - p[f[(k + 1) % 3]]).norm()).sum::<f64>()).sum();
    let sigma = (edge_sum / (3 * topo.faces.len().max(1)) as f64).max(1e-12);
    let smoothed: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut ring: BTreeSet<usize> = BTreeSet::new();
            ring.insert(i);
            for &j in &topo.neighbors[i] {
                ring.insert(j);
                ring.extend(topo.neighbors[j].iter().copied());
            }
            let (mut num, mut den) = (0.0, 0.0);
            for j in ring {
                let w = (-(p[j] - p[i]).norm_squared() / (2.0 * sigma * sigma)).exp();
                num += w * curvature[j];
                den += w;
            }
            num / den
        })
        .collect();
    let max = smoothed.iter().copied().fold(0.0, f64::max);
    // Relative to the largest value; curvature below 1e-9 of it is noise.
    let scale = if max > 1e-12 { 1.0 / max } else { 0.0 };
    topo.rep.iter().map(|&r| smoothed[r] * scale).collect()
}

const OTSU_BINS: usize = 256;

fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

fn bin_center(b: usize) -> f64 {
    (b as f64 + 0.5) / OTSU_BINS as f64
}

/// Between-class variance of every cut `k` (class 0 = bins `0..=k`).
pub fn otsu_between_class(values: &[f64]) -> Vec<f64> {
    let mut hist = [0usize; OTSU_BINS];
    for &v in values {
        hist[bin_of(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = (0..OTSU_BINS).map(|b| hist[b] as f64 * bin_center(b)).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    (0..OTSU_BINS - 1)
        .map(|k| {
            w0 += hist[k] as f64;
            s0 += hist[k] as f64 * bin_center(k);
            let w1 = total - w0;
            if w0 == 0.0 || w1 == 0.0 {
                return 0.0;
            }
            let m0 = s0 / w0;
            let m1 = (sum_all - s0) / w1;
            (w0 / total) * (w1 / total) * (m0 - m1) * (m0 - m1)
        })
        .collect()
}

/// Otsu threshold over a 256-bin histogram of values in `[0, 1]`.
///
/// The cut maximizing between-class variance is chosen (lowest cut on ties)
/// and the threshold is placed halfway between the centers of the occupied
/// bins on either side of it. Values strictly above the threshold form the
/// upper class.
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    let occupied: BTreeSet<usize> = values.iter().map(|&v| bin_of(v)).collect();
    if occupied.len() < 2 {
        return Err(Error::InvalidArgument("Otsu threshold needs at least two distinct histogram bins".into()));
    }
    let var = otsu_between_class(values);
    let mut best = 0;
    for (k, &v) in var.iter().enumerate() {
        if v > var[best] {
            best = k;
        }
    }
    let below = *occupied.range(..=best).next_back().expect("occupied bin below cut");
    let above = *occupied.range(best + 1..).next().expect("occupied bin above cut");
    Ok((bin_center(below) + bin_center(above)) / 2.0)
}

/// Binary salient/non-salient flag per vertex. A map with fewer than two
/// distinct levels has no salient vertices.
pub fn salient_vertices(mesh: &Mesh) -> Vec<bool> {
    let map = saliency_map(mesh);
    match otsu_threshold(&map) {
        Ok(t) => map.iter().map(|&v| v > t).collect(),
        Err(_) => vec![false; map.len()],
    }
}

/// Saliency vote per box: `Some(true)` when more than half of the vertices
/// inside the box are salient, `None` when the box holds no vertices.
pub fn saliency_votes(mesh: &Mesh, salient: &[bool], index: &SpatialIndex, boxes: &[BoxGeom]) -> Vec<Option<bool>> {
    boxes
        .iter()
        .map(|b| {
            let inside = vertices_in_box(mesh, index, b);
            if inside.is_empty() {
                return None;
            }
            let count = inside.iter().filter(|&&v| salient[v]).count();
            Some(count as f64 / inside.len() as f64 > 0.5)
        })
        .collect()
}

/// Fraction of boxes that land on salient regions of the original mesh.
pub fn saliency_error(original: &Mesh, boxes: &[BoxGeom]) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::InvalidArgument("saliency error needs at least one box".into()));
    }
    let salient = salient_vertices(original);
    let index = SpatialIndex::new(original);
    let votes = saliency_votes(original, &salient, &index, boxes);
    let empty = votes.iter().filter(|v| v.is_none()).count();
    if empty > 0 {
        warn!("{empty} box(es) contain no vertices; counted as non-salient");
    }
    Ok(votes.iter().filter(|v| **v == Some(true)).count() as f64 / boxes.len() as f64)
}

/// Inputs for a full evaluation.
pub struct EvaluationInput<'a> {
    pub original: &'a Mesh,
    pub watermarked: &'a Mesh,
    pub labels: Option<&'a [FaceLabel]>,
    pub boxes: &'a [BoxGeom],
    pub views: &'a ViewSet,
    pub n_rays: usize,
    pub smse_samples: usize,
    pub seed: u64,
}

/// Computes every metric the inputs allow.
pub fn evaluate(input: &EvaluationInput<'_>) -> Result<MetricsReport> {
    let boxes = input.boxes;
    let mut report = MetricsReport {
        views: input.views.directions.iter().map(|d| [d.x, d.y, d.z]).collect(),
        h_f: boxes.len(),
        ..Default::default()
    };
    report.smse = Some(smse(input.original, input.watermarked, input.smse_samples, input.seed)?);
    report.ipe = Some(ipe(input.original, input.watermarked));
    let mut per: Vec<WatermarkDiagnostics> = vec![WatermarkDiagnostics::default(); boxes.len()];
    if !boxes.is_empty() {
        let orig_index = SpatialIndex::new(input.original);
        let ratios: Vec<f64> = boxes.iter().map(|b| placement_ratio(input.original, &orig_index, b)).collect();
        report.wps = Some(ratios.iter().sum::<f64>() / ratios.len() as f64);
        let wm_index = SpatialIndex::new(input.watermarked);
        let matrix = visibility_matrix(&wm_index, boxes, input.views, input.n_rays, input.seed);
        report.ray = Some(ray_score(&matrix));
        let salient = salient_vertices(input.original);
        let votes = saliency_votes(input.original, &salient, &orig_index, boxes);
        report.se = Some(votes.iter().filter(|v| **v == Some(true)).count() as f64 / boxes.len() as f64);
        for (i, d) in per.iter_mut().enumerate() {
            d.placement_ratio = Some(ratios[i]);
            d.visibility = matrix.iter().map(|row| row[i]).collect();
            d.saliency_vote = votes[i];
        }
    }
    if let Some(labels) = input.labels {
        let has_top = labels.iter().any(|l| l.is_top());
        if has_top {
            report.lce = Some(lce(input.original, input.watermarked, labels)?);
            let ids: HashSet<usize> = labels.iter().filter_map(|l| l.watermark_index()).collect();
            for (i, d) in per.iter_mut().enumerate() {
                if ids.contains(&i) {
                    d.curvature_variance = lce_for(input.original, input.watermarked, labels, i);
                }
            }
        }
    }
    report.per_watermark = per;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn view_set_has_22_unique_directions() {
        let v = ViewSet::new(30.0).unwrap();
        assert_eq!(v.len(), 22);
        assert!(v.directions.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
        assert!(ViewSet::new(7.0).is_err());
        assert_eq!(ViewSet::new(90.0).unwrap().len(), 6);
    }

    #[test]
    fn wps_simple_cases() {
        let plane = shapes::plane_grid(20.0, 40);
        let b = BoxGeom::axis_aligned(Point::origin(), Vec3::new(2.0, 1.5, 0.25));
        assert!((wps(&plane, &[b]).unwrap() - 1.0).abs() < 1e-12);
        let floating = BoxGeom::axis_aligned(Point::new(0.0, 0.0, 5.0), b.half_extents);
        assert_eq!(wps(&plane, &[floating]).unwrap(), 0.0);
        assert!((wps(&plane, &[b, floating]).unwrap() - 0.5).abs() < 1e-12);
        assert!(wps(&plane, &[]).is_err());
    }

    #[test]
    fn otsu_examples() {
        let mut v = vec![0.0; 50];
        v.extend(vec![1.0; 50]);
        assert!((otsu_threshold(&v).unwrap() - 0.5).abs() <= 1.0 / 256.0);
        let t = otsu_threshold(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!(otsu_threshold(&[0.3; 10]).is_err());
        assert!(otsu_threshold(&[]).is_err());
    }

    #[test]
    fn smse_identity_and_offset() {
        let p = shapes::plane_grid(4.0, 4);
        assert!(smse(&p, &p, 1000, 1).unwrap() < 1e-24);
        let lifted = p.translated(&Vec3::new(0.0, 0.0, 0.3));
        assert!((smse(&p, &lifted, 1000, 1).unwrap() - 0.09).abs() < 1e-9);
    }

    #[test]
    fn ipe_counts_floating_parts() {
        let s = shapes::icosphere(5.0, 2);
        assert_eq!(ipe(&s, &s), 0);
        let glyph = shapes::unit_cube().translated(&Vec3::new(10.0, 0.0, 0.0));
        let with = Mesh::concat([&s, &glyph]);
        assert_eq!(ipe(&s, &with), 1);
    }

    #[test]
    fn saliency_flat_and_sphere() {
        let p = shapes::plane_grid(4.0, 8);
        assert!(saliency_map(&p).iter().all(|&v| v == 0.0));
        let s = shapes::icosphere(10.0, 3);
        let m = saliency_map(&s);
        let (lo, hi) = m.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo < 0.2, "range {lo}..{hi}");
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn saliency_cube_edges_score_higher() {
        let cube = shapes::tessellated_box(Vec3::repeat(4.0), 0.5);
        let m = saliency_map(&cube);
        let mut interior = Vec::new();
        let mut edge = Vec::new();
        for (i, p) in cube.vertices().iter().enumerate() {
            let on_faces = (0..3).filter(|&k| (p[k].abs() - 2.0).abs() < 1e-9).count();
            let far_from_edges = (0..3).filter(|&k| p[k].abs() <= 1.0 + 1e-9).count() == 2;
            if on_faces >= 2 {
                edge.push(m[i]);
            } else if on_faces == 1 && far_from_edges {
                interior.push(m[i]);
            }
        }
        let max_interior = interior.iter().copied().fold(0.0, f64::max);
        let min_edge = edge.iter().copied().fold(f64::MAX, f64::min);
        assert!(min_edge > max_interior, "{min_edge} vs {max_interior}");
    }

    #[test]
    fn lce_flat_emboss_and_errors() {
        // A slab 0.05 above a plane, labelled as a top surface.
        let base = shapes::plane_grid(4.0, 4);
        let top = shapes::plane_grid(2.0, 2).translated(&Vec3::new(0.0, 0.0, 0.05));
        let wm = Mesh::concat([&base, &top]);
        let mut labels = vec![FaceLabel::Target; base.face_count()];
        labels.extend(vec![FaceLabel::Watermark { index: 0, top: true }; top.face_count()]);
        assert!(lce(&base, &wm, &labels).unwrap() < 1e-20);
        let all_target = vec![FaceLabel::Target; wm.face_count()];
        assert!(lce(&base, &wm, &all_target).is_err());
    }

    #[test]
    fn ray_visibility_simple_cases() {
        let plane = shapes::plane_grid(20.0, 4);
        let b = BoxGeom::axis_aligned(Point::origin(), Vec3::new(1.0, 1.0, 0.25));
        let up = ViewSet::from_directions(vec![Vec3::z()]);
        assert_eq!(ray_visibility(&plane, &[b], &up, 16, 3), 1.0);
        let enclosure = shapes::axis_box(Point::new(-5.0, -5.0, -5.0), Point::new(5.0, 5.0, 5.0));
        let views = ViewSet::new(30.0).unwrap();
        assert_eq!(ray_visibility(&enclosure, &[b], &views, 16, 3), 0.0);
    }
}
