//! Helpers for driving the `surfmark` binary in tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surfmark::labels::{parse_sidecar, FaceLabel};
use surfmark::mesh::{parse_obj, write_obj};
use surfmark::shapes;
use surfmark::{Mesh, Vec3};

pub fn sphere() -> Mesh {
    shapes::geodesic_sphere(1.0, 16)
}

pub fn plane() -> Mesh {
    shapes::tessellated_box(Vec3::new(30.0, 30.0, 2.0), 1.0)
}

pub fn torus() -> Mesh {
    shapes::torus(1.3, 1.0, 96, 48)
}

pub fn save(dir: &Path, name: &str, mesh: &Mesh) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, write_obj(mesh).unwrap()).unwrap();
    path
}

pub fn load(path: &Path) -> Mesh {
    parse_obj(&std::fs::read(path).unwrap()).unwrap()
}

pub fn load_labels(path: &Path, mesh: &Mesh) -> Vec<FaceLabel> {
    parse_sidecar(&std::fs::read_to_string(path).unwrap(), mesh.face_count()).unwrap()
}

pub fn surfmark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfmark")).args(args).output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs `watermark` on `input` writing `<dir>/<stem>.obj` and its sidecars.
pub fn watermark(dir: &Path, input: &Path, stem: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(format!("{stem}.obj"));
    let mut args = vec!["watermark", "--input_path", path_str(input), "--output_path", path_str(&out)];
    args.extend_from_slice(extra);
    (surfmark(&args), out)
}
