//! Reduction of optimized candidates to the final watermark set.
//!
//! Stages, in order: loss, roughness, saliency veto, overlap, occlusion,
//! one-per-octant selection, and multi-angle completion.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyph::BoxGeom;
use crate::mesh::{Mesh, SpatialIndex, Vec3};
use crate::metrics::{
    saliency_votes, salient_vertices, vertices_in_box, watermark_unobstructed, ViewSet, VIEW_CONE_DEG,
};
use crate::placement::CandidateBox;

/// Lower bound on |cos| between vertex normals in the roughness score.
const ROUGHNESS_COS_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub loss_threshold: f64,
    pub roughness_threshold: f64,
    pub roughness_samples: usize,
    pub occlusion_rays: usize,
    pub angle_increment: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            loss_threshold: 0.005,
            roughness_threshold: 1.25,
            roughness_samples: 32,
            occlusion_rays: 16,
            angle_increment: 30.0,
            seed: 42,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loss_threshold > 0.0 && self.roughness_threshold > 0.0) {
            return Err(Error::InvalidArgument("filter thresholds must be positive".into()));
        }
        if self.roughness_samples == 0 || self.occlusion_rays == 0 {
            return Err(Error::InvalidArgument("sample and ray counts must be positive".into()));
        }
        ViewSet::new(self.angle_increment).map(|_| ())
    }
}

/// Keeps candidates whose loss is below the threshold.
pub fn filter_by_loss(candidates: &[CandidateBox], threshold: f64) -> Vec<CandidateBox> {
    candidates.iter().filter(|c| c.loss < threshold).cloned().collect()
}

/// Mean over all ordered pairs of up to `n` sampled vertices inside the box
/// of `1 / cos(angle between their normals)`, with the cosine clamped to
/// `[0.05, 1]`. Infinite when the box holds no vertices.
pub fn roughness_score(mesh: &Mesh, geom: &BoxGeom, n: usize, seed: u64) -> f64 {
    let inside: Vec<usize> = (0..mesh.vertex_count()).filter(|&v| geom.contains(&mesh.vertices()[v], 1e-12)).collect();
    roughness_of(mesh, inside, n, seed)
}

fn roughness_of(mesh: &Mesh, mut inside: Vec<usize>, n: usize, seed: u64) -> f64 {
    if inside.is_empty() || n == 0 {
        return f64::INFINITY;
    }
    if inside.len() > n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        inside.shuffle(&mut rng);
        inside.truncate(n);
        inside.sort_unstable();
    }
    let normals: Vec<Vec3> = inside.iter().map(|&v| mesh.vertex_normals()[v]).collect();
    let mut sum = 0.0;
    for a in &normals {
        for b in &normals {
            sum += 1.0 / a.dot(b).clamp(ROUGHNESS_COS_FLOOR, 1.0);
        }
    }
    sum / (normals.len() * normals.len()) as f64
}

/// Keeps candidates with roughness below the threshold.
pub fn filter_by_roughness(
    candidates: &[CandidateBox],
    mesh: &Mesh,
    index: &SpatialIndex,
    cfg: &FilterConfig,
) -> Vec<CandidateBox> {
    let keep: Vec<bool> = candidates
        .par_iter()
        .map(|c| {
            let inside = vertices_in_box(mesh, index, &c.geom);
            let seed = cfg.seed ^ (c.id as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
            roughness_of(mesh, inside, cfg.roughness_samples, seed) < cfg.roughness_threshold
        })
        .collect();
    candidates.iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c.clone()).collect()
}

/// Drops candidates whose box lands on a salient region of the mesh.
pub fn filter_salient(
    candidates: &[CandidateBox],
    mesh: &Mesh,
    index: &SpatialIndex,
    salient: &[bool],
) -> Vec<CandidateBox> {
    let boxes: Vec<BoxGeom> = candidates.iter().map(|c| c.geom).collect();
    let votes = saliency_votes(mesh, salient, index, &boxes);
    candidates.iter().zip(votes).filter(|(_, v)| *v != Some(true)).map(|(c, _)| c.clone()).collect()
}

/// Visits candidates in seeded random order and accepts each one whose set
/// of enclosed mesh vertices is disjoint from every accepted candidate's.
/// The survivors keep their input order.
pub fn filter_overlaps(candidates: &[CandidateBox], mesh: &Mesh, index: &SpatialIndex, seed: u64) -> Vec<CandidateBox> {
    let sets: Vec<Vec<usize>> = candidates.par_iter().map(|c| vertices_in_box(mesh, index, &c.geom)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = vec![false; mesh.vertex_count()];
    let mut accepted = vec![false; candidates.len()];
    for i in order {
        if sets[i].iter().all(|&v| !taken[v]) {
            accepted[i] = true;
            for &v in &sets[i] {
                taken[v] = true;
            }
        }
    }
    candidates.iter().zip(accepted).filter(|(_, a)| *a).map(|(c, _)| c.clone()).collect()
}

/// Whether rays from a `k × k` grid on the front face (k² ≈ `n_rays`),
/// cast along the front normal, all miss the mesh.
pub fn front_clear(index: &SpatialIndex, geom: &BoxGeom, n_rays: usize) -> bool {
    let k = (n_rays as f64).sqrt().ceil().max(1.0) as usize;
    let n = geom.front_normal();
    geom.front_grid(k, 0.0).iter().all(|p| index.ray_intersect(p, &n).is_none())
}

/// Drops candidates with any front-face ray blocked by the mesh.
pub fn filter_occluded(candidates: &[CandidateBox], index: &SpatialIndex, n_rays: usize) -> Vec<CandidateBox> {
    let keep: Vec<bool> = candidates.par_iter().map(|c| front_clear(index, &c.geom, n_rays)).collect();
    candidates.iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c.clone()).collect()
}

fn octant_of(v: &Vec3) -> usize {
    (v.x < 0.0) as usize | ((v.y < 0.0) as usize) << 1 | ((v.z < 0.0) as usize) << 2
}

fn octant_diagonal(o: usize) -> Vec3 {
    let s = |bit: usize| if o & (1 << bit) != 0 { -1.0 } else { 1.0 };
    Vec3::new(s(0), s(1), s(2)).normalize()
}

/// Keeps one candidate per non-empty octant around the origin. The first
/// non-empty octant (in fixed order) contributes the candidate nearest its
/// diagonal direction; every later octant the candidate farthest from all
/// already-selected box centres.
pub fn select_octants(candidates: &[CandidateBox]) -> Vec<CandidateBox> {
    let mut selected: Vec<CandidateBox> = Vec::new();
    for o in 0..8 {
        let members: Vec<&CandidateBox> = candidates.iter().filter(|c| octant_of(&c.geom.center.coords) == o).collect();
        if members.is_empty() {
            continue;
        }
        let score = |c: &CandidateBox| -> f64 {
            if selected.is_empty() {
                let p = c.geom.center.coords;
                let norm = p.norm();
                if norm > 0.0 {
                    p.dot(&octant_diagonal(o)) / norm
                } else {
                    -1.0
                }
            } else {
                selected.iter().map(|s| (s.geom.center - c.geom.center).norm()).fold(f64::INFINITY, f64::min)
            }
        };
        let mut best = members[0];
        let mut best_score = score(best);
        for &c in &members[1..] {
            let s = score(c);
            if s > best_score || (s == best_score && c.id < best.id) {
                best = c;
                best_score = s;
            }
        }
        selected.push(best.clone());
    }
    selected
}

/// Which view directions are covered by a watermark set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub directions: Vec<Vec3>,
    pub covered: Vec<bool>,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.covered.is_empty() {
            return 1.0;
        }
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len() as f64
    }
}

fn view_seed(seed: u64, view: usize, id: usize) -> u64 {
    seed ^ ((view as u64) << 40) ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Whether the candidate faces `dir` within the view cone and is seen
/// unobstructed from it.
fn covers(c: &CandidateBox, dir: &Vec3, view: usize, index: &SpatialIndex, n_rays: usize, seed: u64) -> bool {
    c.geom.front_normal().dot(dir) >= VIEW_CONE_DEG.to_radians().cos() - 1e-12
        && watermark_unobstructed(index, &c.geom, dir, n_rays, view_seed(seed, view, c.id))
}

/// Coverage of `set` over the view directions.
pub fn coverage(set: &[CandidateBox], views: &ViewSet, index: &SpatialIndex, n_rays: usize, seed: u64) -> Coverage {
    let covered = views
        .directions
        .iter()
        .enumerate()
        .map(|(vi, d)| set.iter().any(|c| covers(c, d, vi, index, n_rays, seed)))
        .collect();
    Coverage { directions: views.directions.clone(), covered }
}

/// Adds, for each view direction no selected watermark covers, the
/// unselected candidate whose front normal is closest to that direction,
/// provided it faces the view within the cone and is unobstructed.
pub fn add_multi_angle(
    all_candidates: &[CandidateBox],
    selected: &[CandidateBox],
    index: &SpatialIndex,
    cfg: &FilterConfig,
) -> Result<(Vec<CandidateBox>, Coverage)> {
    let views = ViewSet::new(cfg.angle_increment)?;
    let mut out: Vec<CandidateBox> = selected.to_vec();
    for (vi, d) in views.directions.iter().enumerate() {
        if out.iter().any(|c| covers(c, d, vi, index, cfg.occlusion_rays, cfg.seed)) {
            continue;
        }
        let mut best: Option<(&CandidateBox, f64)> = None;
        for c in all_candidates {
            if out.iter().any(|s| s.id == c.id) || !covers(c, d, vi, index, cfg.occlusion_rays, cfg.seed) {
                continue;
            }
            let align = c.geom.front_normal().dot(d);
            if best.is_none_or(|(b, a)| align > a || (align == a && c.id < b.id)) {
                best = Some((c, align));
            }
        }
        if let Some((c, _)) = best {
            out.push(c.clone());
        }
    }
    let cov = coverage(&out, &views, index, cfg.occlusion_rays, cfg.seed);
    Ok((out, cov))
}

/// Candidate counts after each stage, for run manifests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterTrace {
    pub input: usize,
    pub after_loss: usize,
    pub after_roughness: usize,
    pub after_saliency: usize,
    pub after_overlap: usize,
    pub after_occlusion: usize,
    pub after_octants: usize,
    pub final_count: usize,
    pub coverage: f64,
}

/// Runs the full cascade.
pub fn run_cascade(
    candidates: &[CandidateBox],
    mesh: &Mesh,
    index: &SpatialIndex,
    cfg: &FilterConfig,
) -> Result<(Vec<CandidateBox>, FilterTrace, Coverage)> {
    cfg.validate()?;
    let mut trace = FilterTrace { input: candidates.len(), ..Default::default() };
    let c = filter_by_loss(candidates, cfg.loss_threshold);
    trace.after_loss = c.len();
    let c = filter_by_roughness(&c, mesh, index, cfg);
    trace.after_roughness = c.len();
    let salient = salient_vertices(mesh);
    let c = filter_salient(&c, mesh, index, &salient);
    trace.after_saliency = c.len();
    let c = filter_overlaps(&c, mesh, index, cfg.seed);
    trace.after_overlap = c.len();
    let pool = filter_occluded(&c, index, cfg.occlusion_rays);
    trace.after_occlusion = pool.len();
    let selected = select_octants(&pool);
    trace.after_octants = selected.len();
    let (out, cov) = add_multi_angle(&pool, &selected, index, cfg)?;
    trace.final_count = out.len();
    trace.coverage = cov.fraction();
    Ok((out, trace, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Point, SurfacePoint};
    use crate::shapes;

    fn cand(id: usize, center: Point, normal: Vec3, loss: f64) -> CandidateBox {
        let rot = crate::placement::compute_angles(&normal);
        let geom = BoxGeom { center, half_extents: Vec3::new(1.0, 1.0, 0.25), rotation: rot };
        let anchor = SurfacePoint { position: center, normal, face_index: 0 };
        CandidateBox { id, loss, ..CandidateBox::new(geom, anchor) }
    }

    #[test]
    fn loss_filter_keeps_order() {
        let cs: Vec<_> =
            [0.001, 0.004, 0.006].iter().enumerate().map(|(i, &l)| cand(i, Point::origin(), Vec3::z(), l)).collect();
        let kept = filter_by_loss(&cs, 0.005);
        assert_eq!(kept.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1]);
        assert!(filter_by_loss(&cs, 0.0001).is_empty());
    }

    #[test]
    fn roughness_flat_and_edge() {
        let plane = shapes::plane_grid(10.0, 20);
        let b = BoxGeom::axis_aligned(Point::origin(), Vec3::new(2.0, 2.0, 0.25));
        assert!((roughness_score(&plane, &b, 32, 1) - 1.0).abs() < 1e-12);
        let empty = BoxGeom::axis_aligned(Point::new(0.0, 0.0, 9.0), b.half_extents);
        assert!(roughness_score(&plane, &empty, 32, 1).is_infinite());
        let cube = shapes::tessellated_box(Vec3::repeat(10.0), 0.5);
        let edge = BoxGeom::axis_aligned(Point::new(5.0, 0.0, 5.0), Vec3::new(1.0, 2.0, 1.0));
        assert!(roughness_score(&cube, &edge, 32, 1) > 1.25);
    }

    #[test]
    fn overlap_keeps_one_of_coincident_pair() {
        let sphere = shapes::icosphere(10.0, 3);
        let idx = SpatialIndex::new(&sphere);
        let top = Point::new(0.0, 0.0, 10.0);
        let cs = vec![
            cand(0, top, Vec3::z(), 0.0),
            cand(1, top, Vec3::z(), 0.0),
            cand(2, Point::new(0.0, 0.0, -10.0), -Vec3::z(), 0.0),
        ];
        let kept = filter_overlaps(&cs, &sphere, &idx, 5);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[1].id, 2);
    }

    #[test]
    fn octants() {
        let mut cs = Vec::new();
        for o in 0..8 {
            let d = octant_diagonal(o) * 10.0;
            cs.push(cand(o, Point::from(d), d.normalize(), 0.0));
        }
        assert_eq!(select_octants(&cs).len(), 8);
        let two = vec![
            cand(0, Point::new(1.0, 1.0, 1.0), Vec3::z(), 0.0),
            cand(1, Point::new(2.0, 1.0, 1.0), Vec3::z(), 0.0),
        ];
        assert_eq!(select_octants(&two).len(), 1);
    }

    #[test]
    fn occlusion_under_overhang() {
        // A box sitting in the gap of a torus-like overhang: a slab above it.
        let slab = shapes::axis_box(Point::new(-5.0, -5.0, 3.0), Point::new(5.0, 5.0, 4.0));
        let idx = SpatialIndex::new(&slab);
        let under = cand(0, Point::origin(), Vec3::z(), 0.0);
        let beside = cand(1, Point::new(20.0, 0.0, 0.0), Vec3::z(), 0.0);
        let kept = filter_occluded(&[under, beside], &idx, 16);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 1);
    }
}
