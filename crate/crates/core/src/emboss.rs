//! Fusing posed text solids into a target mesh.
//!
//! For each watermark the part of the text solid inside the target is
//! computed; its upper boundary is a patch of the target surface. That solid
//! is offset a fixed distance along the surface normal nearest the
//! watermark, so the raised text surface follows the local shape of the
//! target, and the offset solids are united with the target. Debossing cuts
//! the layer of the same depth just below the patch instead.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csg::{boolean_solids, fold_many, BoolOp, Operand, Solid};
use crate::error::{Error, Result};
use crate::glyph::BoxGeom;
use crate::labels::FaceLabel;
use crate::mesh::{weld_vertices, Mesh, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuseMode {
    #[default]
    Emboss,
    Deboss,
}

impl std::str::FromStr for FuseMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "emboss" => Ok(FuseMode::Emboss),
            "deboss" => Ok(FuseMode::Deboss),
            _ => Err(format!("unknown mode `{s}` (expected emboss or deboss)")),
        }
    }
}

/// Extruded solid with a flag per face marking the translated copy of the
/// input surface.
#[derive(Clone, Debug)]
pub struct Extrusion {
    pub mesh: Mesh,
    pub top: Vec<bool>,
}

/// Extrudes a surface along `direction` by `distance`.
///
/// An open surface becomes a slab: the translated surface on top, the
/// original (reversed) below, and walls along its boundary. A closed
/// surface has no boundary to stitch, so every vertex is simply offset and
/// the result is the translated solid.
pub fn extrude_along(mesh: &Mesh, direction: &Vec3, distance: f64) -> Result<Mesh> {
    extrude_labeled(mesh, direction, distance, &vec![true; mesh.face_count()]).map(|e| e.mesh)
}

/// [`extrude_along`] reporting which output faces are offset copies of
/// input faces flagged in `top_source`.
pub fn extrude_labeled(mesh: &Mesh, direction: &Vec3, distance: f64, top_source: &[bool]) -> Result<Extrusion> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::InvalidArgument(format!("extrusion distance must be positive, got {distance}")));
    }
    if mesh.is_empty() || !(mesh.total_area() > 0.0) {
        return Err(Error::ZeroArea);
    }
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("extrusion direction is zero".into()));
    }
    let offset = direction / norm * distance;
    let flag = |fi: usize| top_source.get(fi).copied().unwrap_or(false);
    if mesh.boundary_edge_count() == 0 {
        let top = (0..mesh.face_count()).map(flag).collect();
        return Ok(Extrusion { mesh: mesh.translated(&offset), top });
    }
    // Exact-duplicate weld so seams of a polygon soup still connect.
    let (rep, positions) = weld_vertices(mesh.vertices(), 0.0);
    let mut source = Vec::new();
    let mut wfaces = Vec::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let g = [rep[f[0]], rep[f[1]], rep[f[2]]];
        if g[0] != g[1] && g[1] != g[2] && g[0] != g[2] {
            wfaces.push(g);
            source.push(fi);
        }
    }
    let n = positions.len();
    let mut vertices = positions.clone();
    vertices.extend(positions.iter().map(|p| p + offset));
    let mut faces = Vec::with_capacity(wfaces.len() * 2);
    let mut top = Vec::with_capacity(wfaces.len() * 2);
    for (f, &src) in wfaces.iter().zip(&source) {
        faces.push([f[0] + n, f[1] + n, f[2] + n]);
        top.push(flag(src));
        faces.push([f[0], f[2], f[1]]);
        top.push(false);
    }
    let mut twins = std::collections::HashSet::new();
    for f in &wfaces {
        for k in 0..3 {
            twins.insert((f[k], f[(k + 1) % 3]));
        }
    }
    for f in &wfaces {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            if !twins.contains(&(v, u)) {
                faces.push([u, v, v + n]);
                faces.push([u, v + n, u + n]);
                top.extend([false, false]);
            }
        }
    }
    let mut out = Mesh::new(vertices, faces)?;
    if out.signed_volume() < 0.0 {
        out = out.flipped();
    }
    Ok(Extrusion { mesh: out, top })
}

/// One watermark to fuse: the posed text solid and its box.
#[derive(Clone, Debug)]
pub struct PosedWatermark {
    pub mesh: Mesh,
    pub geom: BoxGeom,
}

/// Result of fusing watermarks into a target.
#[derive(Clone, Debug)]
pub struct FuseResult {
    pub mesh: Mesh,
    /// One label per face; watermark indices count fused watermarks only.
    pub labels: Vec<FaceLabel>,
    /// Input positions of the fused watermarks, in label-index order.
    pub fused: Vec<usize>,
    /// Input positions of watermarks skipped for lying off the surface.
    pub skipped: Vec<usize>,
    /// Sweep direction used for each fused watermark.
    pub directions: Vec<Vec3>,
}

/// Fused geometry of one watermark and its extrusion direction.
struct Tool {
    solid: Extrusion,
    direction: Vec3,
}

fn tool_for(target: &Solid<'_>, wm: &PosedWatermark, strength: f64, mode: FuseMode) -> Result<Option<Tool>> {
    let w = Solid::new(&wm.mesh, "watermark")?;
    let inter = boolean_solids(target, &w, BoolOp::Intersection)?;
    if inter.mesh.is_empty() || inter.mesh.signed_volume() <= 1e-12 {
        return Ok(None);
    }
    let centroid = wm.mesh.vertex_centroid();
    let direction = target.index.closest_point_with_normal(&centroid).map(|(_, n)| n).ok_or(Error::EmptyMesh)?;
    // Faces of the intersection that came from the target surface.
    let from_target: Vec<bool> = inter.origins.iter().map(|o| o.operand == Operand::A).collect();
    let solid = match mode {
        FuseMode::Emboss => extrude_labeled(&inter.mesh, &direction, strength, &from_target)?,
        FuseMode::Deboss => recess_cutter(&inter.mesh, target.mesh, &direction, strength)?,
    };
    Ok(Some(Tool { solid, direction }))
}

/// Fuses every watermark into the target (emboss: union; deboss: recess
/// of the same depth).
pub fn curve_matching_fuse(
    target: &Mesh,
    watermarks: &[PosedWatermark],
    strength: f64,
    mode: FuseMode,
) -> Result<FuseResult> {
    if !(strength > 0.0) {
        return Err(Error::InvalidArgument(format!("strength must be positive, got {strength}")));
    }
    let tsolid = Solid::new(target, "target")?;
    let built: Vec<Result<Option<Tool>>> =
        watermarks.par_iter().map(|wm| tool_for(&tsolid, wm, strength, mode)).collect();
    let mut fused = Vec::new();
    let mut skipped = Vec::new();
    let mut tools: Vec<Extrusion> = Vec::new();
    let mut directions = Vec::new();
    for (i, t) in built.into_iter().enumerate() {
        match t? {
            None => {
                warn!("watermark {i} does not intersect the target; skipped");
                skipped.push(i);
            }
            Some(tool) => {
                fused.push(i);
                tools.push(tool.solid);
                directions.push(tool.direction);
            }
        }
    }
    let op = match mode {
        FuseMode::Emboss => BoolOp::Union,
        FuseMode::Deboss => BoolOp::Difference,
    };
    let (mesh, prov) = fold_many(target, &tools.iter().map(|t| t.mesh.clone()).collect::<Vec<_>>(), op)?;
    let labels = prov
        .iter()
        .map(|p| match p {
            None => FaceLabel::Target,
            Some((i, f)) => FaceLabel::Watermark { index: *i, top: tools[*i].top[*f] },
        })
        .collect();
    Ok(FuseResult { mesh, labels, fused, skipped, directions })
}

/// Layer of `inside` (the watermark part within the target) no deeper than
/// `depth` below the target surface, measured along `direction`. Faces from
/// the sunk target surface form the recess floor and are flagged as top.
fn recess_cutter(inside: &Mesh, target: &Mesh, direction: &Vec3, depth: f64) -> Result<Extrusion> {
    let sunk = target.translated(&(-direction.normalize() * depth));
    let a = Solid::new(inside, "watermark")?;
    let b = Solid::new(&sunk, "sunk target")?;
    let cut = boolean_solids(&a, &b, BoolOp::Difference)?;
    let top = cut.origins.iter().map(|o| o.operand == Operand::B).collect();
    Ok(Extrusion { mesh: cut.mesh, top })
}

/// Union of the target with the posed watermarks as they are, labelling the faces
/// that point along each box's front normal as top. This is the
/// no-curve-matching baseline.
pub fn flat_union(target: &Mesh, watermarks: &[PosedWatermark]) -> Result<FuseResult> {
    let meshes: Vec<Mesh> = watermarks.iter().map(|w| w.mesh.clone()).collect();
    let (mesh, prov) = fold_many(target, &meshes, BoolOp::Union)?;
    let labels = prov
        .iter()
        .map(|p| match p {
            None => FaceLabel::Target,
            Some((i, f)) => {
                let n = watermarks[*i].mesh.face_normals()[*f];
                FaceLabel::Watermark { index: *i, top: n.dot(&watermarks[*i].geom.front_normal()) > 1.0 - 1e-9 }
            }
        })
        .collect();
    Ok(FuseResult {
        mesh,
        labels,
        fused: (0..watermarks.len()).collect(),
        skipped: Vec::new(),
        directions: watermarks.iter().map(|w| w.geom.front_normal()).collect(),
    })
}

/// Poses a canonical text mesh (centred at the origin, facing +Z) into a
/// box.
pub fn pose_text(text: &Mesh, geom: &BoxGeom) -> Mesh {
    text.map_vertices(|p| geom.center + geom.rotation * p.coords)
}
