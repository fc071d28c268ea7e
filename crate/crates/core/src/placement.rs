//! Candidate box generation and rigid-pose refinement.
//!
//! Boxes are seeded on well-spread surface samples, oriented along the
//! sampled normal, and then refined by gradient descent on the mean squared
//! distance between the box mid-plane outline and the surface.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyph::{corner_offset, rotation_between, BoxGeom};
use crate::mesh::{surface_sample, Mesh, Point, SpatialIndex, SurfacePoint, Vec3};

/// Gradient-descent settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_steps: usize,
    pub stop_mean_loss: f64,
    pub learning_rate: f64,
    pub probe_count: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_steps: 200, stop_mean_loss: 0.005, learning_rate: 0.05, probe_count: 179 }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || self.probe_count < 4 {
            return Err(Error::InvalidArgument("max_steps must be > 0 and probe_count >= 4".into()));
        }
        if !(self.stop_mean_loss > 0.0 && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("stop_mean_loss and learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// One watermark placeholder and its pose parameters
/// `[alpha, beta, gamma, tx, ty, tz]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateBox {
    /// Current pose.
    pub geom: BoxGeom,
    pub params: [f64; 6],
    /// Pose the parameters are applied to.
    pub base: BoxGeom,
    /// Corners of `base`, indexed as in [`BoxGeom::corners`].
    pub base_vertices: [Point; 8],
    /// Mean squared alignment loss at `params` (NaN before evaluation).
    pub loss: f64,
    /// Loss of the seeded pose (NaN before optimization).
    pub initial_loss: f64,
    /// Gradient steps taken by the optimizer.
    pub steps: usize,
    pub anchor: SurfacePoint,
    /// Position in the list produced by [`init_candidates`]; used for
    /// deterministic tie-breaking.
    pub id: usize,
}

impl CandidateBox {
    pub fn new(base: BoxGeom, anchor: SurfacePoint) -> Self {
        Self {
            geom: base,
            params: [0.0; 6],
            base,
            base_vertices: base.corners(),
            loss: f64::NAN,
            initial_loss: f64::NAN,
            steps: 0,
            anchor,
            id: 0,
        }
    }

    /// Replaces the parameters and re-derives the pose.
    pub fn set_params(&mut self, params: [f64; 6]) {
        self.params = params;
        self.geom = pose_from_params(&self.base, &params);
    }
}

fn pose_from_params(base: &BoxGeom, p: &[f64; 6]) -> BoxGeom {
    BoxGeom {
        center: base.center + Vec3::new(p[3], p[4], p[5]),
        half_extents: base.half_extents,
        rotation: euler_rotation(p[0], p[1], p[2]) * base.rotation,
    }
}

/// `Rz(gamma) * Ry(beta) * Rx(alpha)`: rotate about X first, then Y, then Z.
pub fn euler_rotation(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    rot_z(gamma) * rot_y(beta) * rot_x(alpha)
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Rotation that turns the canonical front direction +Z onto `normal`.
pub fn compute_angles(normal: &Vec3) -> Matrix3<f64> {
    rotation_between(&Vec3::z(), &normal.normalize())
}

/// Samples `h_s` surface points, drops any closer than `h_r` to an earlier
/// accepted point, and poses a copy of `template` at each survivor.
pub fn init_candidates(mesh: &Mesh, template: &BoxGeom, h_s: usize, h_r: f64, seed: u64) -> Result<Vec<CandidateBox>> {
    if h_s == 0 || !(h_r > 0.0) {
        return Err(Error::InvalidArgument("H_s and H_r must be positive".into()));
    }
    let samples = surface_sample(mesh, h_s, seed)?;
    let mut accepted: Vec<SurfacePoint> = Vec::new();
    for s in samples {
        if accepted.iter().all(|a| (a.position - s.position).norm() >= h_r) {
            accepted.push(s);
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoCandidates { radius: h_r });
    }
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(id, anchor)| {
            let r = compute_angles(&anchor.normal);
            let base = BoxGeom {
                center: anchor.position + r * template.center.coords,
                half_extents: template.half_extents,
                rotation: r * template.rotation,
            };
            CandidateBox { id, ..CandidateBox::new(base, anchor) }
        })
        .collect())
}

/// Corners after translating by the parameter offset and rotating about the
/// translated centroid.
pub fn transform_vertices(candidate: &CandidateBox) -> [Point; 8] {
    let p = &candidate.params;
    let t = Vec3::new(p[3], p[4], p[5]);
    let moved = candidate.base_vertices.map(|v| v + t);
    let c = moved.iter().fold(Vec3::zeros(), |acc, v| acc + v.coords) / 8.0;
    let r = euler_rotation(p[0], p[1], p[2]);
    moved.map(|v| Point::from(c + r * (v.coords - c)))
}

/// Mid-plane outline probes: the four midpoints of front/back corner pairs
/// followed by `j - 4` points spread over the four outline segments in
/// proportion to their length.
pub fn sample_probe_points(geom: &BoxGeom, j: usize) -> Vec<Point> {
    probe_offsets(&geom.half_extents, j).iter().map(|l| geom.to_world(l)).collect()
}

fn probe_offsets(h: &Vec3, j: usize) -> Vec<Vec3> {
    let j = j.max(4);
    let mids: [Vec3; 4] = [
        (corner_offset(0, h) + corner_offset(4, h)) / 2.0,
        (corner_offset(1, h) + corner_offset(5, h)) / 2.0,
        (corner_offset(3, h) + corner_offset(7, h)) / 2.0,
        (corner_offset(2, h) + corner_offset(6, h)) / 2.0,
    ];
    let lengths: Vec<f64> = (0..4).map(|k| (mids[(k + 1) % 4] - mids[k]).norm()).collect();
    let alloc = allocate(j - 4, &lengths);
    let mut out = mids.to_vec();
    for k in 0..4 {
        let (a, b) = (mids[k], mids[(k + 1) % 4]);
        let n = alloc[k];
        for i in 1..=n {
            let t = i as f64 / (n + 1) as f64;
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Largest-remainder apportionment of `total` items by `weights`.
fn allocate(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        let mut v = vec![total / weights.len(); weights.len()];
        for slot in v.iter_mut().take(total % weights.len()) {
            *slot += 1;
        }
        return v;
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut v: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - v.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        v[k] += 1;
        rest -= 1;
    }
    v
}

/// Mean squared distance from the points to the indexed surface.
pub fn alignment_loss(points: &[Point], index: &SpatialIndex) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let sum: f64 = points.iter().map(|p| index.closest_point(p).map_or(0.0, |h| h.distance * h.distance)).sum();
    sum / points.len() as f64
}

/// Loss and gradient at the candidate's current parameters.
struct Evaluation {
    loss: f64,
    grad: [f64; 6],
    /// Mean squared lever arm of the probes about each rotation axis.
    moments: [f64; 3],
}

fn evaluate(candidate: &CandidateBox, offsets: &[Vec3], index: &SpatialIndex) -> Evaluation {
    let p = &candidate.params;
    let (rx, ry, rz) = (rot_x(p[0]), rot_y(p[1]), rot_z(p[2]));
    let r = rz * ry * rx;
    let jac = [rz * ry * d_rot_x(p[0]), rz * d_rot_y(p[1]) * rx, d_rot_z(p[2]) * ry * rx];
    // Effective rotation axes of the three angles at the current pose.
    let axes = [rz * ry * Vec3::x(), rz * Vec3::y(), Vec3::z()];
    let c0 = candidate.base.center;
    let t = Vec3::new(p[3], p[4], p[5]);
    let mut loss = 0.0;
    let mut grad = [0.0; 6];
    let mut moments = [0.0; 3];
    for d in offsets {
        let s = c0 + t + r * d;
        let Some(hit) = index.closest_point(&s) else { continue };
        let diff = s - hit.point;
        loss += diff.norm_squared();
        for k in 0..3 {
            grad[k] += 2.0 * diff.dot(&(jac[k] * d));
            grad[3 + k] += 2.0 * diff[k];
            moments[k] += axes[k].cross(&(r * d)).norm_squared();
        }
    }
    let n = offsets.len().max(1) as f64;
    Evaluation { loss: loss / n, grad: grad.map(|g| g / n), moments: moments.map(|m| m / n) }
}

/// Offsets of the probes from the base centre, in world orientation.
fn base_probe_offsets(candidate: &CandidateBox, j: usize) -> Vec<Vec3> {
    probe_offsets(&candidate.base.half_extents, j).iter().map(|l| candidate.base.rotation * l).collect()
}

/// Analytic gradient of the alignment loss with respect to
/// `[alpha, beta, gamma, tx, ty, tz]`, holding the closest points fixed.
pub fn loss_gradient(candidate: &CandidateBox, index: &SpatialIndex, probe_count: usize) -> [f64; 6] {
    evaluate(candidate, &base_probe_offsets(candidate, probe_count), index).grad
}

/// Alignment loss of the candidate at its current parameters.
pub fn candidate_loss(candidate: &CandidateBox, index: &SpatialIndex, probe_count: usize) -> f64 {
    alignment_loss(&sample_probe_points(&candidate.geom, probe_count), index)
}

/// Refines every candidate independently by gradient descent.
///
/// Translation steps use the learning rate directly. Each rotation step is
/// divided by the mean squared lever arm of the probes about that axis, so
/// the step is scale-free: without it, a fixed rate that suits a small box
/// overshoots and diverges on a wide one. The best pose seen is returned,
/// so the final loss never exceeds the initial one.
pub fn optimize(candidates: Vec<CandidateBox>, index: &SpatialIndex, opts: &OptimizerOptions) -> Vec<CandidateBox> {
    candidates.into_par_iter().map(|c| optimize_one(c, index, opts)).collect()
}

fn optimize_one(mut c: CandidateBox, index: &SpatialIndex, opts: &OptimizerOptions) -> CandidateBox {
    let offsets = base_probe_offsets(&c, opts.probe_count);
    let mut best_params = c.params;
    let mut best_loss = f64::INFINITY;
    let mut steps = 0;
    let mut initial = f64::NAN;
    loop {
        let e = evaluate(&c, &offsets, index);
        if initial.is_nan() {
            initial = e.loss;
        }
        if e.loss < best_loss {
            best_loss = e.loss;
            best_params = c.params;
        }
        if e.loss < opts.stop_mean_loss || steps >= opts.max_steps || !e.loss.is_finite() {
            break;
        }
        let floor = 1e-9 * e.moments.iter().sum::<f64>().max(1e-12);
        let mut next = c.params;
        for k in 0..3 {
            next[k] -= opts.learning_rate * e.grad[k] / e.moments[k].max(floor);
            next[3 + k] -= opts.learning_rate * e.grad[3 + k];
        }
        c.set_params(next);
        steps += 1;
    }
    c.set_params(best_params);
    c.loss = best_loss;
    c.initial_loss = initial;
    c.steps = steps;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn anchor() -> SurfacePoint {
        SurfacePoint { position: Point::origin(), normal: Vec3::z(), face_index: 0 }
    }

    fn unit_box() -> BoxGeom {
        BoxGeom::axis_aligned(Point::origin(), Vec3::repeat(0.5))
    }

    #[test]
    fn identity_params_keep_vertices() {
        let c = CandidateBox::new(unit_box(), anchor());
        assert_eq!(transform_vertices(&c), c.base_vertices);
    }

    #[test]
    fn translation_shifts_centroid() {
        let mut c = CandidateBox::new(unit_box(), anchor());
        c.set_params([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let v = transform_vertices(&c);
        let centroid = v.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / 8.0;
        assert!((centroid - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotation_is_rigid_about_centroid() {
        let geom = BoxGeom::axis_aligned(Point::new(1.0, 2.0, 3.0), Vec3::new(2.0, 1.0, 0.25));
        let mut c = CandidateBox::new(geom, anchor());
        c.set_params([0.3, -0.4, std::f64::consts::FRAC_PI_2, 0.5, 0.1, -0.2]);
        let v = transform_vertices(&c);
        let b = &c.base_vertices;
        for i in 0..8 {
            for j in 0..8 {
                assert!(((v[i] - v[j]).norm() - (b[i] - b[j]).norm()).abs() < 1e-9);
            }
        }
        let centroid = v.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / 8.0;
        assert!((centroid - Vec3::new(1.5, 2.1, 2.8)).norm() < 1e-12);
        // The parameterised pose agrees with the transformed corners.
        let corners = c.geom.corners();
        for i in 0..8 {
            assert!((corners[i] - v[i]).norm() < 1e-9);
        }
        let r = euler_rotation(0.3, -0.4, 1.0);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_probes_are_edge_midpoints() {
        let p = sample_probe_points(&unit_box(), 4);
        let expected = [
            Point::new(-0.5, -0.5, 0.0),
            Point::new(0.5, -0.5, 0.0),
            Point::new(0.5, 0.5, 0.0),
            Point::new(-0.5, 0.5, 0.0),
        ];
        assert_eq!(p.len(), 4);
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn probes_lie_on_mid_plane() {
        let geom = BoxGeom {
            center: Point::new(3.0, -1.0, 2.0),
            half_extents: Vec3::new(4.0, 2.0, 0.25),
            rotation: euler_rotation(0.4, 1.1, -0.3),
        };
        let pts = sample_probe_points(&geom, 179);
        assert_eq!(pts.len(), 179);
        let n = geom.front_normal();
        let front = geom.center + n * 0.25;
        let back = geom.center - n * 0.25;
        for p in &pts {
            let df = (front - p).dot(&n);
            let db = (p - back).dot(&n);
            assert!((df - db).abs() < 1e-9);
        }
        // Long sides receive proportionally more probes than short ones.
        let local: Vec<Vec3> = pts.iter().map(|p| geom.to_local(p)).collect();
        let on_long = local.iter().filter(|l| (l.y.abs() - 2.0).abs() < 1e-9).count();
        let on_short = local.iter().filter(|l| (l.x.abs() - 4.0).abs() < 1e-9).count();
        assert!(on_long > on_short);
    }

    #[test]
    fn allocation_sums() {
        assert_eq!(allocate(175, &[1.0, 1.0, 1.0, 1.0]).iter().sum::<usize>(), 175);
        assert_eq!(allocate(7, &[2.0, 1.0, 2.0, 1.0]), vec![3, 1, 2, 1]);
        assert_eq!(allocate(3, &[0.0; 4]), vec![1, 1, 1, 0]);
    }

    #[test]
    fn init_on_sphere() {
        let sphere = shapes::icosphere(10.0, 3);
        let template = BoxGeom::axis_aligned(Point::origin(), Vec3::new(2.0, 2.0, 0.25));
        let cands = init_candidates(&sphere, &template, 300, 1.0, 7).unwrap();
        assert!(!cands.is_empty() && cands.len() <= 300);
        for (i, a) in cands.iter().enumerate() {
            assert!((a.geom.front_normal() - a.anchor.normal).norm() < 1e-6);
            assert!((a.geom.center - a.anchor.position).norm() < 1e-12);
            for b in &cands[i + 1..] {
                assert!((a.anchor.position - b.anchor.position).norm() >= 1.0);
            }
        }
        assert!(matches!(
            init_candidates(&sphere, &template, 300, 1e6, 7),
            Ok(v) if v.len() == 1
        ));
    }

    #[test]
    fn compute_angles_special_cases() {
        assert!((compute_angles(&Vec3::z()) - Matrix3::identity()).norm() < 1e-12);
        let r = compute_angles(&-Vec3::z());
        assert!((r * Vec3::z() + Vec3::z()).norm() < 1e-12);
        assert!((r * Vec3::x() - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn loss_over_plane() {
        let plane = shapes::plane_grid(40.0, 8);
        let idx = SpatialIndex::new(&plane);
        let geom = BoxGeom::axis_aligned(Point::origin(), Vec3::new(2.0, 1.0, 0.25));
        assert!(alignment_loss(&sample_probe_points(&geom, 179), &idx) < 1e-24);
        let h = 0.7;
        let lifted = BoxGeom::axis_aligned(Point::new(0.0, 0.0, h), geom.half_extents);
        let l = alignment_loss(&sample_probe_points(&lifted, 179), &idx);
        assert!((l - h * h).abs() < 1e-12);
        let mut c = CandidateBox::new(lifted, anchor());
        c.set_params([0.0; 6]);
        let g = loss_gradient(&c, &idx, 179);
        assert!((g[5] - 2.0 * h).abs() < 1e-12);
        assert!(g[3].abs() < 1e-12 && g[4].abs() < 1e-12);
        let aligned = CandidateBox::new(geom, anchor());
        let g0 = loss_gradient(&aligned, &idx, 179);
        assert!(g0.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9);
    }

    #[test]
    fn tilted_box_converges_on_plane() {
        let plane = shapes::plane_grid(40.0, 8);
        let idx = SpatialIndex::new(&plane);
        let base = BoxGeom {
            center: Point::new(0.0, 0.0, 0.3),
            half_extents: Vec3::new(2.0, 2.0, 0.25),
            rotation: euler_rotation(20f64.to_radians(), 0.0, 0.0),
        };
        let c = CandidateBox::new(base, anchor());
        let out = optimize(vec![c], &idx, &OptimizerOptions::default());
        assert!(out[0].loss < 0.005, "loss {}", out[0].loss);
        assert!(out[0].loss <= out[0].initial_loss + 1e-12);
        assert!(out[0].steps <= 200);
    }

    #[test]
    fn aligned_box_does_not_move() {
        let plane = shapes::plane_grid(40.0, 8);
        let idx = SpatialIndex::new(&plane);
        let base = BoxGeom::axis_aligned(Point::origin(), Vec3::new(2.0, 2.0, 0.25));
        let out = optimize(vec![CandidateBox::new(base, anchor())], &idx, &OptimizerOptions::default());
        assert_eq!(out[0].steps, 0);
        assert!(out[0].params.iter().all(|p| p.abs() < 1e-6));
    }

    #[test]
    fn wide_box_stays_stable() {
        let plane = shapes::plane_grid(80.0, 8);
        let idx = SpatialIndex::new(&plane);
        let base = BoxGeom {
            center: Point::new(0.0, 0.0, 0.3),
            half_extents: Vec3::new(14.5, 2.0, 0.25),
            rotation: euler_rotation(0.05, 0.08, 0.0),
        };
        let out = optimize(vec![CandidateBox::new(base, anchor())], &idx, &OptimizerOptions::default());
        assert!(out[0].loss < 0.005, "loss {}", out[0].loss);
    }
}
