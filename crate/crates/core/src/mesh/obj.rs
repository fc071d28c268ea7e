//! Wavefront OBJ reading and writing (geometry only).

use std::fmt::Write as _;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Parses `v` and `f` records. Texture/normal references in face records,
/// comments and grouping/material statements are ignored. Polygons are
/// fan-triangulated from their first vertex.
pub fn parse_obj(bytes: &[u8]) -> Result<Mesh> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse { line: 0, message: format!("input is not UTF-8 text: {e}") })?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap_or("");
        match tag {
            "v" => {
                let coords: Vec<&str> = parts.collect();
                // Some exporters append vertex colors; only the first three fields are geometry.
                if coords.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut xyz = [0.0; 3];
                for k in 0..3 {
                    xyz[k] = coords[k].parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid coordinate {:?}", coords[k]),
                    })?;
                }
                vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let mut idx = Vec::new();
                for token in parts {
                    let head = token.split('/').next().unwrap_or("");
                    let value: i64 = head.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid face index {token:?}"),
                    })?;
                    // Negative indices are relative to the vertices read so far.
                    let resolved = if value < 0 { vertices.len() as i64 + value } else { value - 1 };
                    if resolved < 0 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("face index {value} out of range"),
                        });
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, found {}", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                    face_lines.push(line_no);
                }
            }
            "vt" | "vn" | "vp" | "g" | "o" | "s" | "usemtl" | "mtllib" | "l" | "p" => {}
            other => return Err(Error::Parse { line: line_no, message: format!("unknown record {other:?}") }),
        }
    }
    if vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Mesh::new(vertices, faces)
}

/// Serializes vertices and faces (1-based) with round-trippable precision.
pub fn write_obj(mesh: &Mesh) -> Result<Vec<u8>> {
    if mesh.vertices().is_empty() || mesh.faces().is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 24);
    for p in mesh.vertices() {
        // `{}` on f64 prints the shortest string that parses back to the same value.
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    const CUBE: &str =
        "# unit cube\r\no cube\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
        vt 0 0\nvn 0 0 1\nusemtl mat\ns off\ng side\n\
        f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

    #[test]
    fn parses_cube() {
        let m = parse_obj(CUBE.as_bytes()).unwrap();
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.face_count(), 12);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3 4\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn comments_only_is_empty() {
        assert!(matches!(parse_obj(b"# nothing\n# here\n"), Err(Error::EmptyMesh)));
    }

    #[test]
    fn malformed_line_reports_number() {
        match parse_obj(b"v 0 0 0\nv 1 x 0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_obj(b"v 0 0 0\nv 1 0 0\nf 1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_is_structural_error() {
        let err = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 8, .. }));
    }

    #[test]
    fn writes_cube() {
        let text = String::from_utf8(write_obj(&shapes::unit_cube()).unwrap()).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
        assert!(write_obj(&Mesh::empty()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in 0u64..1000) {
            let m = shapes::random_soup(100, seed);
            let back = parse_obj(&write_obj(&m).unwrap()).unwrap();
            prop_assert_eq!(back.faces(), m.faces());
            for (a, b) in back.vertices().iter().zip(m.vertices()) {
                prop_assert!((a - b).norm() <= 1e-6);
            }
        }
    }
}
