//! Crop and removal attacks used to probe watermark robustness.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::csg::{boolean_op, BoolOp, Operand};
use crate::error::{Error, Result};
use crate::glyph::{rotation_between, BoxGeom};
use crate::labels::FaceLabel;
use crate::mesh::{Mesh, Point, Vec3};

/// Relative tolerance on the kept volume for fraction crops.
pub const FRACTION_TOLERANCE: f64 = 0.01;

/// Cutting plane; the crop removes the half-space the normal points into.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Point,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Point, normal: Vec3) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite()) || !point.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("crop plane needs a finite point and a non-zero normal".into()));
        }
        Ok(Self { point, normal: normal / len })
    }

    pub fn signed_distance(&self, p: &Point) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Crop,
    Removal,
}

impl std::str::FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "crop" => Ok(AttackKind::Crop),
            "removal" => Ok(AttackKind::Removal),
            _ => Err(format!("unknown attack kind `{s}` (expected crop or removal)")),
        }
    }
}

/// Attack description. A crop uses `plane` when given, otherwise it keeps
/// `fraction` of the volume by cutting perpendicular to `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub plane: Option<Plane>,
    pub fraction: Option<f64>,
    pub axis: Vec3,
}

impl AttackSpec {
    pub fn removal() -> Self {
        Self { kind: AttackKind::Removal, plane: None, fraction: None, axis: Vec3::x() }
    }

    pub fn crop_plane(plane: Plane) -> Self {
        Self { kind: AttackKind::Crop, plane: Some(plane), fraction: None, axis: Vec3::x() }
    }

    pub fn crop_fraction(fraction: f64, axis: Vec3) -> Self {
        Self { kind: AttackKind::Crop, plane: None, fraction: Some(fraction), axis }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AttackKind::Crop {
            match (self.plane, self.fraction) {
                (Some(_), None) => {}
                (None, Some(f)) => {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(Error::InvalidArgument(format!("crop fraction must be in (0, 1], got {f}")));
                    }
                    if !(self.axis.norm() > 0.0) {
                        return Err(Error::InvalidArgument("crop axis is zero".into()));
                    }
                }
                _ => return Err(Error::InvalidArgument("a crop needs exactly one of a plane or a fraction".into())),
            }
        }
        Ok(())
    }
}

/// Attacked mesh with labels carried over (cap faces are target faces).
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub mesh: Mesh,
    pub labels: Option<Vec<FaceLabel>>,
    /// Plane actually used by a crop.
    pub plane: Option<Plane>,
}

pub fn apply_attack(mesh: &Mesh, labels: Option<&[FaceLabel]>, spec: &AttackSpec) -> Result<AttackOutcome> {
    spec.validate()?;
    match spec.kind {
        AttackKind::Removal => {
            let labels = labels.ok_or_else(|| Error::InvalidArgument("removal needs face labels".into()))?;
            let (mesh, kept) = removal_attack_labeled(mesh, labels)?;
            Ok(AttackOutcome { mesh, labels: Some(kept), plane: None })
        }
        AttackKind::Crop => {
            let plane = match spec.plane {
                Some(p) => p,
                None => fraction_plane(mesh, &spec.axis, spec.fraction.unwrap_or(1.0))?,
            };
            let (mesh, kept) = crop_attack_labeled(mesh, labels, &plane)?;
            Ok(AttackOutcome { mesh, labels: kept, plane: Some(plane) })
        }
    }
}

/// Removes the part of a closed mesh on the normal side of `plane`.
pub fn crop_attack(mesh: &Mesh, plane: &Plane) -> Result<Mesh> {
    crop_attack_labeled(mesh, None, plane).map(|(m, _)| m)
}

/// [`crop_attack`] carrying face labels through the cut.
pub fn crop_attack_labeled(
    mesh: &Mesh,
    labels: Option<&[FaceLabel]>,
    plane: &Plane,
) -> Result<(Mesh, Option<Vec<FaceLabel>>)> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if let Some(l) = labels {
        check_label_count(mesh, l)?;
    }
    let d: Vec<f64> = mesh.vertices().iter().map(|p| plane.signed_distance(p)).collect();
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min >= 0.0 {
        warn!("crop plane does not cut the mesh; output unchanged");
        return Ok((mesh.clone(), labels.map(|l| l.to_vec())));
    }
    let bb = mesh.aabb();
    let reach = (bb.extent().norm() + (bb.center() - plane.point).norm()) * 2.0 + 1.0;
    let cutter = BoxGeom {
        center: plane.point + plane.normal * (reach / 2.0),
        half_extents: Vec3::new(reach, reach, reach / 2.0),
        rotation: rotation_between(&Vec3::z(), &plane.normal),
    }
    .to_mesh();
    let res = boolean_op(mesh, &cutter, BoolOp::Difference)?;
    let kept = labels.map(|l| {
        res.origins
            .iter()
            .map(|o| match o.operand {
                Operand::A => l[o.face],
                Operand::B => FaceLabel::Target,
            })
            .collect()
    });
    Ok((res.mesh, kept))
}

/// Volume of a closed mesh on the non-normal side of the plane, from the
/// clipped boundary alone: with the apex of every signed tetrahedron on the
/// plane the cap contributes nothing.
pub fn volume_below(mesh: &Mesh, plane: &Plane) -> f64 {
    let apex = plane.point;
    let mut vol = 0.0;
    for f in 0..mesh.face_count() {
        let tri = mesh.triangle(f);
        let poly = clip_triangle(&tri, plane);
        for k in 1..poly.len().saturating_sub(1) {
            let (a, b, c) = (poly[0] - apex, poly[k] - apex, poly[k + 1] - apex);
            vol += a.dot(&b.cross(&c)) / 6.0;
        }
    }
    vol
}

/// Part of a triangle on the non-positive side of the plane.
fn clip_triangle(tri: &[Point; 3], plane: &Plane) -> Vec<Point> {
    let d: Vec<f64> = tri.iter().map(|p| plane.signed_distance(p)).collect();
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if d[i] <= 0.0 {
            out.push(tri[i]);
        }
        if (d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0) {
            let t = d[i] / (d[i] - d[j]);
            out.push(tri[i] + (tri[j] - tri[i]) * t);
        }
    }
    out
}

/// Plane perpendicular to `axis` keeping `fraction` of the volume on its
/// non-normal side, located by bisection on the offset.
pub fn fraction_plane(mesh: &Mesh, axis: &Vec3, fraction: f64) -> Result<Plane> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("crop fraction must be in (0, 1], got {fraction}")));
    }
    let n = axis.try_normalize(0.0).ok_or_else(|| Error::InvalidArgument("crop axis is zero".into()))?;
    let total = mesh.signed_volume();
    if !(total > 0.0) {
        return Err(Error::Degenerate("crop needs a closed mesh with positive volume".into()));
    }
    let proj: Vec<f64> = mesh.vertices().iter().map(|p| p.coords.dot(&n)).collect();
    let mut lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let goal = fraction * total;
    let plane_at = |t: f64| Plane { point: Point::from(n * t), normal: n };
    if fraction >= 1.0 {
        return Ok(plane_at(hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = volume_below(mesh, &plane_at(mid));
        if (v - goal).abs() <= FRACTION_TOLERANCE * 0.1 * goal {
            return Ok(plane_at(mid));
        }
        if v < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(plane_at(0.5 * (lo + hi)))
}

/// Deletes every watermark face and the vertices left unreferenced.
pub fn removal_attack(mesh: &Mesh, labels: &[FaceLabel]) -> Result<Mesh> {
    removal_attack_labeled(mesh, labels).map(|(m, _)| m)
}

fn removal_attack_labeled(mesh: &Mesh, labels: &[FaceLabel]) -> Result<(Mesh, Vec<FaceLabel>)> {
    check_label_count(mesh, labels)?;
    if !labels.iter().any(|l| l.is_watermark()) {
        return Err(Error::InvalidArgument("no watermark-labeled faces to remove".into()));
    }
    let keep: Vec<usize> = (0..mesh.face_count()).filter(|&f| !labels[f].is_watermark()).collect();
    let kept = vec![FaceLabel::Target; keep.len()];
    Ok((mesh.submesh(keep), kept))
}

fn check_label_count(mesh: &Mesh, labels: &[FaceLabel]) -> Result<()> {
    if labels.len() != mesh.face_count() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a mesh with {} faces",
            labels.len(),
            mesh.face_count()
        )));
    }
    Ok(())
}

/// Number of distinct watermark indices among the labels.
pub fn watermark_count(labels: &[FaceLabel]) -> usize {
    let set: std::collections::BTreeSet<usize> = labels.iter().filter_map(|l| l.watermark_index()).collect();
    set.len()
}
