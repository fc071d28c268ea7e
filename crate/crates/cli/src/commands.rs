//! Implementations of the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use surfmark::attacks::{apply_attack, watermark_count, AttackKind, AttackSpec, Plane};
use surfmark::glyph::BoxGeom;
use surfmark::labels::{parse_sidecar, write_sidecar, FaceLabel};
use surfmark::mesh::{parse_obj, write_obj};
use surfmark::metrics::{evaluate as compute_metrics, EvaluationInput, ViewSet};
use surfmark::pipeline::{self, Manifest, PipelineConfig};
use surfmark::{Error, Mesh, Point, Vec3};

use crate::args::{AttackArgs, EvaluateArgs, WatermarkArgs};

/// A failed command: exit code and message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    pub const PIPELINE: u8 = 3;
    pub const SIDECAR: u8 = 4;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(Self::USAGE, message)
    }

    /// Maps a library error: bad arguments are usage errors, I/O stays I/O,
    /// everything else (including unsupported characters) is a pipeline
    /// failure.
    fn from_core(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::InvalidWatermark(_) => Self::USAGE,
            Error::Io(_) => Self::IO,
            _ => Self::PIPELINE,
        };
        Self::new(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn read_bytes(path: &Path, code: u8) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::new(code, format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::new(Failure::IO, format!("cannot write {}: {e}", path.display())))
}

fn read_mesh(path: &Path) -> Result<Mesh, Failure> {
    let bytes = read_bytes(path, Failure::IO)?;
    parse_obj(&bytes).map_err(|e| Failure::new(Failure::IO, format!("{}: {e}", path.display())))
}

fn write_mesh(path: &Path, mesh: &Mesh) -> CmdResult {
    write_file(path, &write_obj(mesh).map_err(Failure::from_core)?)
}

fn read_labels(path: &Path, mesh: &Mesh) -> Result<Vec<FaceLabel>, Failure> {
    let bytes = read_bytes(path, Failure::SIDECAR)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::new(Failure::SIDECAR, format!("{} is not UTF-8 text", path.display())))?;
    parse_sidecar(&text, mesh.face_count())
        .map_err(|e| Failure::new(Failure::SIDECAR, format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    write_file(path, s.as_bytes())
}

/// `out.obj` → `out.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn load_config(args: &mut WatermarkArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let bytes = read_bytes(path, Failure::IO)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    std::mem::take(&mut args.flags).apply(&mut cfg);
    cfg.validate().map_err(Failure::from_core)?;
    Ok(cfg)
}

pub fn watermark(mut args: WatermarkArgs) -> CmdResult {
    let cfg = load_config(&mut args)?;
    let input =
        cfg.input_path.clone().ok_or_else(|| Failure::usage("no input: pass --input_path or set it in the config"))?;
    let output = cfg
        .output_path
        .clone()
        .ok_or_else(|| Failure::usage("no output: pass --output_path or set it in the config"))?;
    let output = PathBuf::from(output);
    let mesh = read_mesh(Path::new(&input))?;
    info!("read {input}: {} vertices, {} faces", mesh.vertex_count(), mesh.face_count());

    let out = pipeline::run(&mesh, &cfg).map_err(Failure::from_core)?;
    write_mesh(&output, &out.watermarked)?;
    let sidecar = args.sidecar.unwrap_or_else(|| sibling(&output, "labels.txt"));
    write_file(&sidecar, write_sidecar(&out.labels).as_bytes())?;
    let manifest = args.manifest.unwrap_or_else(|| sibling(&output, "manifest.json"));
    write_json(&manifest, &out.manifest)?;
    let timings = args.timings.unwrap_or_else(|| sibling(&output, "timings.json"));
    write_json(&timings, &out.timings)?;

    let m = &out.manifest;
    println!("candidates      {}", m.h);
    println!("after filtering {}", m.selected);
    println!("watermarks      {}", m.h_f);
    println!("view coverage   {:.3}", m.filter.coverage);
    println!("output          {} ({} vertices, {} faces)", output.display(), m.output_vertices, m.output_faces);
    println!("time            {:.2} s", out.timings.total);
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let bytes = read_bytes(path, Failure::IO)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Failure::new(Failure::IO, format!("invalid manifest {}: {e}", path.display())))
}

pub fn evaluate(args: EvaluateArgs) -> CmdResult {
    let views = ViewSet::new(args.angle_increment).map_err(Failure::from_core)?;
    if args.n_rays == 0 {
        return Err(Failure::usage("n_rays must be positive"));
    }
    let mut original = read_mesh(&args.original)?;
    let watermarked = read_mesh(&args.watermarked)?;
    let mut boxes: Vec<BoxGeom> = Vec::new();
    if let Some(path) = &args.manifest {
        let manifest = read_manifest(path)?;
        original = pipeline::prepare_model(&original, &manifest.config).map_err(Failure::from_core)?;
        boxes = manifest.watermarks.iter().map(|w| w.geom).collect();
    }
    let labels = match &args.sidecar {
        Some(path) => Some(read_labels(path, &watermarked)?),
        None if args.lce => return Err(Failure::new(Failure::SIDECAR, "LCE requested but no sidecar given")),
        None => None,
    };
    if args.lce && !labels.as_ref().is_some_and(|l| l.iter().any(|l| l.is_top())) {
        return Err(Failure::new(Failure::SIDECAR, "LCE requested but the sidecar labels no watermark top faces"));
    }

    let report = compute_metrics(&EvaluationInput {
        original: &original,
        watermarked: &watermarked,
        labels: labels.as_deref(),
        boxes: &boxes,
        views: &views,
        n_rays: args.n_rays,
        smse_samples: args.smse_samples,
        seed: args.seed,
    })
    .map_err(Failure::from_core)?;
    print!("{}", report.to_table());
    if report.se.is_some() {
        println!("(SE uses a curvature-based saliency proxy)");
    }
    let path = args.report.unwrap_or_else(|| sibling(&args.watermarked, "report.json"));
    write_json(&path, &report)
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn attack_spec(args: &AttackArgs) -> Result<AttackSpec, Failure> {
    match args.kind {
        AttackKind::Removal => {
            if args.plane.is_some() || args.fraction.is_some() {
                return Err(Failure::usage("removal takes no --plane or --fraction"));
            }
            Ok(AttackSpec::removal())
        }
        AttackKind::Crop => match (&args.plane, args.fraction) {
            (Some(p), None) => {
                let plane = Plane::new(Point::from(vec3(&p[..3])), vec3(&p[3..])).map_err(Failure::from_core)?;
                Ok(AttackSpec::crop_plane(plane))
            }
            (None, Some(f)) => Ok(AttackSpec::crop_fraction(f, vec3(&args.axis))),
            _ => Err(Failure::usage("crop needs exactly one of --plane or --fraction")),
        },
    }
}

pub fn attack(args: AttackArgs) -> CmdResult {
    let spec = attack_spec(&args)?;
    spec.validate().map_err(Failure::from_core)?;
    let mesh = read_mesh(&args.input)?;
    let labels = match &args.sidecar {
        Some(path) => Some(read_labels(path, &mesh)?),
        None if spec.kind == AttackKind::Removal => return Err(Failure::usage("removal needs --sidecar")),
        None => None,
    };
    let before = labels.as_deref().map(watermark_count);
    let out = apply_attack(&mesh, labels.as_deref(), &spec).map_err(Failure::from_core)?;
    write_mesh(&args.output, &out.mesh)?;
    if let Some(kept) = &out.labels {
        let path = args.sidecar_out.clone().unwrap_or_else(|| sibling(&args.output, "labels.txt"));
        write_file(&path, write_sidecar(kept).as_bytes())?;
    }

    println!("faces           {} -> {}", mesh.face_count(), out.mesh.face_count());
    println!("volume          {:.6} -> {:.6}", mesh.signed_volume(), out.mesh.signed_volume());
    println!("boundary edges  {}", out.mesh.boundary_edge_count());
    if let (Some(b), Some(kept)) = (before, &out.labels) {
        println!("watermarks      {b} -> {}", watermark_count(kept));
    }
    if let Some(p) = out.plane {
        println!(
            "plane           point ({:.6}, {:.6}, {:.6}) normal ({:.6}, {:.6}, {:.6})",
            p.point.x, p.point.y, p.point.z, p.normal.x, p.normal.y, p.normal.z
        );
    }
    Ok(())
}
