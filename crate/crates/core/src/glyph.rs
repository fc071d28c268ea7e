//! Text-to-solid conversion and the box geometry that stands in for a
//! watermark during placement.
//!
//! Glyphs come from an embedded 5×7 block font. Every lit cell becomes a
//! unit prism; prisms of one character share their lattice vertices so each
//! character is a single closed, consistently oriented solid.

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Vec3};

const ROWS: usize = 7;
const COLS: usize = 5;
/// Gap between neighbouring characters as a fraction of the glyph width.
pub const CHAR_SPACING: f64 = 0.15;

/// Text watermark parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatermarkSpec {
    /// Characters to render: letters, digits and spaces. Letters are
    /// upper-cased before rendering.
    pub text: String,
    /// Glyph height in model units.
    pub size: f64,
    /// Front-to-back depth in model units.
    pub thickness: f64,
}

impl WatermarkSpec {
    pub fn new(text: impl Into<String>, size: f64, thickness: f64) -> Self {
        Self { text: text.into(), size, thickness }
    }

    /// Trimmed, upper-cased text after checking every character is supported.
    pub fn normalized_text(&self) -> Result<String> {
        let text = self.text.trim().to_ascii_uppercase();
        if text.is_empty() {
            return Err(Error::InvalidWatermark("watermark text is empty".into()));
        }
        let bad: String = text.chars().filter(|&c| c != ' ' && glyph_rows(c).is_none()).collect();
        if !bad.is_empty() {
            return Err(Error::UnsupportedCharacter(bad));
        }
        Ok(text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size > 0.0 && self.size.is_finite()) {
            return Err(Error::InvalidWatermark(format!("size must be positive, got {}", self.size)));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::InvalidWatermark(format!("thickness must be positive, got {}", self.thickness)));
        }
        self.normalized_text().map(|_| ())
    }
}

/// Oriented box: `rotation` columns are the local axes, local +Z is the
/// watermark's front normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGeom {
    pub center: Point,
    pub half_extents: Vec3,
    pub rotation: Matrix3<f64>,
}

impl BoxGeom {
    pub fn axis_aligned(center: Point, half_extents: Vec3) -> Self {
        Self { center, half_extents, rotation: Matrix3::identity() }
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into_owned()
    }

    /// Unit normal of the front face.
    pub fn front_normal(&self) -> Vec3 {
        self.axis(2)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn front_area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    pub fn to_local(&self, p: &Point) -> Vec3 {
        self.rotation.transpose() * (p - self.center)
    }

    pub fn to_world(&self, local: &Vec3) -> Point {
        self.center + self.rotation * local
    }

    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i] + slack)
    }

    /// Corners indexed by sign bits: bit 0 → x, bit 1 → y, bit 2 → z
    /// (set bit = positive side). Corners 4..8 lie on the front face.
    pub fn corners(&self) -> [Point; 8] {
        std::array::from_fn(|i| self.to_world(&corner_offset(i, &self.half_extents)))
    }

    /// `n × n` grid of cell centres on the front face, offset `lift` along
    /// the front normal.
    pub fn front_grid(&self, n: usize, lift: f64) -> Vec<Point> {
        let h = self.half_extents;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let u = (i as f64 + 0.5) / n as f64 * 2.0 - 1.0;
                let v = (j as f64 + 0.5) / n as f64 * 2.0 - 1.0;
                out.push(self.to_world(&Vec3::new(u * h.x, v * h.y, h.z + lift)));
            }
        }
        out
    }

    /// Closed triangle mesh of the box (outward winding).
    pub fn to_mesh(&self) -> Mesh {
        let c = self.corners();
        let faces = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Mesh::new(c.to_vec(), faces).expect("valid box")
    }
}

pub(crate) fn corner_offset(i: usize, h: &Vec3) -> Vec3 {
    let s = |bit: usize| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
    Vec3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z)
}

/// Rotation taking `from` onto `to` (both unit). Antiparallel vectors are
/// handled by a half turn about the X axis.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Matrix3<f64> {
    let c = from.dot(to);
    if c < -1.0 + 1e-6 && (to + from).norm() < 1e-6 * 2.0 {
        return *Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI).matrix();
    }
    match Rotation3::rotation_between(from, to) {
        Some(r) => *r.matrix(),
        None => *Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI).matrix(),
    }
}

/// Renders the spec as a closed solid centred at the origin with its front
/// faces toward +Z.
pub fn text_to_3d(spec: &WatermarkSpec) -> Result<Mesh> {
    spec.validate()?;
    let text = spec.normalized_text()?;
    let cell = spec.size / ROWS as f64;
    let advance = (COLS as f64 + CHAR_SPACING * COLS as f64) * cell;
    let half_t = spec.thickness / 2.0;
    let mut parts = Vec::new();
    for (k, ch) in text.chars().enumerate() {
        if ch == ' ' {
            continue;
        }
        let cells = glyph_cells(ch).expect("validated");
        parts.push(cells_to_prism(&cells, k as f64 * advance, cell, half_t));
    }
    if parts.is_empty() {
        return Err(Error::InvalidWatermark("watermark text has no visible characters".into()));
    }
    let mesh = Mesh::concat(parts.iter());
    let c = mesh.aabb().center();
    Ok(mesh.translated(&-c.coords))
}

/// Axis-aligned box of a glyph mesh generated at the origin, expressed as an
/// oriented box with identity rotation.
pub fn oriented_bounding_box(mesh: &Mesh) -> BoxGeom {
    let bb = mesh.aabb();
    BoxGeom::axis_aligned(bb.center(), bb.extent() / 2.0)
}

/// Lit cells of a character as (column, row) with row 0 at the bottom,
/// after closing diagonal-only contacts so the cells are edge-connected.
pub(crate) fn glyph_cells(ch: char) -> Option<[[bool; COLS]; ROWS]> {
    let rows = glyph_rows(ch)?;
    // grid[r][c], r = 0 bottom.
    let mut grid = [[false; COLS]; ROWS];
    for (i, row) in rows.iter().enumerate() {
        for (c, b) in row.bytes().enumerate() {
            grid[ROWS - 1 - i][c] = b == b'#';
        }
    }
    // Two cells touching only at a corner would give a non-manifold vertex;
    // fill one of the two free cells of such a 2×2 block.
    loop {
        let mut changed = false;
        for r in 0..ROWS - 1 {
            for c in 0..COLS - 1 {
                let (a, b, d, e) = (grid[r][c], grid[r][c + 1], grid[r + 1][c], grid[r + 1][c + 1]);
                if a && e && !b && !d {
                    grid[r][c + 1] = true;
                    changed = true;
                } else if b && d && !a && !e {
                    grid[r][c] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Some(grid)
}

fn cells_to_prism(grid: &[[bool; COLS]; ROWS], x0: f64, cell: f64, half_t: f64) -> Mesh {
    // Lattice vertex (i, j, layer) with layer 0 = back, 1 = front.
    let vid = |i: usize, j: usize, layer: usize| (layer * (ROWS + 1) + j) * (COLS + 1) + i;
    let mut vertices = Vec::with_capacity(2 * (ROWS + 1) * (COLS + 1));
    for layer in 0..2 {
        let z = if layer == 0 { -half_t } else { half_t };
        for j in 0..=ROWS {
            for i in 0..=COLS {
                vertices.push(Point::new(x0 + i as f64 * cell, j as f64 * cell, z));
            }
        }
    }
    let lit = |c: isize, r: isize| {
        r >= 0 && c >= 0 && (r as usize) < ROWS && (c as usize) < COLS && grid[r as usize][c as usize]
    };
    let mut faces = Vec::new();
    let mut quad = |a: usize, b: usize, c: usize, d: usize| {
        faces.push([a, b, c]);
        faces.push([a, c, d]);
    };
    for (r, row) in grid.iter().enumerate() {
        for (c, &on) in row.iter().enumerate() {
            if !on {
                continue;
            }
            let (i, j) = (c, r);
            quad(vid(i, j, 1), vid(i + 1, j, 1), vid(i + 1, j + 1, 1), vid(i, j + 1, 1));
            quad(vid(i, j, 0), vid(i, j + 1, 0), vid(i + 1, j + 1, 0), vid(i + 1, j, 0));
            let (ci, ri) = (c as isize, r as isize);
            if !lit(ci, ri - 1) {
                quad(vid(i, j, 0), vid(i + 1, j, 0), vid(i + 1, j, 1), vid(i, j, 1));
            }
            if !lit(ci, ri + 1) {
                quad(vid(i + 1, j + 1, 0), vid(i, j + 1, 0), vid(i, j + 1, 1), vid(i + 1, j + 1, 1));
            }
            if !lit(ci - 1, ri) {
                quad(vid(i, j + 1, 0), vid(i, j, 0), vid(i, j, 1), vid(i, j + 1, 1));
            }
            if !lit(ci + 1, ri) {
                quad(vid(i + 1, j, 0), vid(i + 1, j + 1, 0), vid(i + 1, j + 1, 1), vid(i + 1, j, 1));
            }
        }
    }
    let mesh = Mesh::new(vertices, faces).expect("valid glyph");
    let used: Vec<usize> = (0..mesh.face_count()).collect();
    mesh.submesh(used)
}

/// Characters the embedded font can render (space advances only).
pub fn supported_characters() -> impl Iterator<Item = char> {
    ('A'..='Z').chain('0'..='9')
}

fn glyph_rows(ch: char) -> Option<[&'static str; ROWS]> {
    Some(match ch {
        'A' => [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'B' => ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
        'C' => [".####", "#....", "#....", "#....", "#....", "#....", ".####"],
        'D' => ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
        'E' => ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
        'F' => ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
        'G' => [".####", "#....", "#....", "#.###", "#...#", "#...#", ".###."],
        'H' => ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'I' => ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"],
        'J' => ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
        'K' => ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
        'L' => ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
        'M' => ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
        'N' => ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"],
        'O' => [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'P' => ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
        'Q' => [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
        'R' => ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
        'S' => [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
        'T' => ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
        'U' => ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'V' => ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
        'W' => ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"],
        'X' => ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
        'Y' => ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
        'Z' => ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
        '0' => [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
        '1' => ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
        '2' => [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
        '3' => ["####.", "....#", "....#", ".###.", "....#", "....#", "####."],
        '4' => ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
        '5' => ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
        '6' => [".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."],
        '7' => ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
        '8' => [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
        '9' => [".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."],
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::connected_components;

    fn edge_connected(grid: &[[bool; COLS]; ROWS]) -> bool {
        let lit: Vec<(usize, usize)> =
            (0..ROWS).flat_map(|r| (0..COLS).map(move |c| (r, c))).filter(|&(r, c)| grid[r][c]).collect();
        let mut seen = vec![lit[0]];
        let mut stack = vec![lit[0]];
        while let Some((r, c)) = stack.pop() {
            for (dr, dc) in [(0i32, 1i32), (0, -1), (1, 0), (-1, 0)] {
                let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                if nr < 0 || nc < 0 || nr >= ROWS as i32 || nc >= COLS as i32 {
                    continue;
                }
                let n = (nr as usize, nc as usize);
                if grid[n.0][n.1] && !seen.contains(&n) {
                    seen.push(n);
                    stack.push(n);
                }
            }
        }
        seen.len() == lit.len()
    }

    #[test]
    fn every_glyph_is_one_manifold_piece() {
        for ch in supported_characters() {
            let grid = glyph_cells(ch).unwrap();
            assert!(edge_connected(&grid), "{ch}");
            let m = text_to_3d(&WatermarkSpec::new(ch.to_string(), 4.0, 0.5)).unwrap();
            assert_eq!(m.boundary_edge_count(), 0, "{ch}");
            assert!(m.signed_volume() > 0.0, "{ch}");
            let (count, _) = connected_components(&m, 0.0);
            assert_eq!(count, 1, "{ch}");
        }
    }

    #[test]
    fn single_i_dimensions() {
        let m = text_to_3d(&WatermarkSpec::new("I", 4.0, 0.5)).unwrap();
        let bb = m.aabb();
        let e = bb.extent();
        assert!((e.y - 4.0).abs() < 1e-12);
        assert!((e.z - 0.5).abs() < 1e-12);
        assert!(bb.center().coords.norm() < 1e-12);
        let b = oriented_bounding_box(&m);
        assert!((b.half_extents - Vec3::new(e.x / 2.0, 2.0, 0.25)).norm() < 1e-12);
        assert_eq!(b.rotation, Matrix3::identity());
        // Front faces point toward +Z.
        let front = m.face_normals().iter().filter(|n| n.z > 0.99).count();
        assert!(front > 0);
    }

    #[test]
    fn watermark_has_one_component_per_character() {
        let m = text_to_3d(&WatermarkSpec::new("WATERMARK", 4.0, 0.5)).unwrap();
        let (count, _) = connected_components(&m, 1e-6);
        assert_eq!(count, 9);
        let lower = text_to_3d(&WatermarkSpec::new("watermark", 4.0, 0.5)).unwrap();
        assert_eq!(lower.vertices(), m.vertices());
    }

    #[test]
    fn spaces_advance_without_geometry() {
        let a = text_to_3d(&WatermarkSpec::new("A A", 4.0, 0.5)).unwrap();
        let (count, _) = connected_components(&a, 1e-6);
        assert_eq!(count, 2);
        let w = a.aabb().extent().x;
        let cell = 4.0 / 7.0;
        assert!((w - (2.0 * 5.75 * cell + 5.0 * cell)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            text_to_3d(&WatermarkSpec::new("A€B", 4.0, 0.5)),
            Err(Error::UnsupportedCharacter(s)) if s == "€"
        ));
        assert!(text_to_3d(&WatermarkSpec::new("   ", 4.0, 0.5)).is_err());
        assert!(text_to_3d(&WatermarkSpec::new("A", 0.0, 0.5)).is_err());
        assert!(text_to_3d(&WatermarkSpec::new("A", 4.0, -1.0)).is_err());
    }

    #[test]
    fn box_contains_glyph_and_rotated_boxes_grow() {
        let m = text_to_3d(&WatermarkSpec::new("K7", 4.0, 0.5)).unwrap();
        let b = oriented_bounding_box(&m);
        assert!(m.vertices().iter().all(|p| b.contains(p, 1e-9)));
        let r = Rotation3::from_euler_angles(0.3, -0.2, 0.7);
        let rotated = m.map_vertices(|p| r * p);
        let rb = oriented_bounding_box(&rotated);
        assert!(rb.volume() >= b.volume() - 1e-9);
        let cube = crate::shapes::unit_cube();
        let cb = oriented_bounding_box(&cube);
        assert!((cb.half_extents - Vec3::repeat(0.5)).norm() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let s = WatermarkSpec::new("OK42", 3.0, 0.4);
        let a = text_to_3d(&s).unwrap();
        let b = text_to_3d(&s).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.faces(), b.faces());
    }

    #[test]
    fn rotation_between_cases() {
        let z = Vec3::z();
        assert!((rotation_between(&z, &z) - Matrix3::identity()).norm() < 1e-12);
        let r = rotation_between(&z, &-z);
        assert!((r * z + z).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        let n = Vec3::new(0.3, -0.5, 0.8).normalize();
        assert!((rotation_between(&z, &n) * z - n).norm() < 1e-12);
    }

    #[test]
    fn box_mesh_is_closed() {
        let b = BoxGeom {
            center: Point::new(1.0, 2.0, 3.0),
            half_extents: Vec3::new(1.0, 2.0, 0.5),
            rotation: *Rotation3::from_euler_angles(0.1, 0.2, 0.3).matrix(),
        };
        let m = b.to_mesh();
        assert_eq!(m.boundary_edge_count(), 0);
        assert!((m.signed_volume() - b.volume()).abs() < 1e-9);
    }
}
