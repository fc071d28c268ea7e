//! WebAssembly bindings for the browser demo: watermark a built-in shape,
//! evaluate the result, and strip the watermarks again.

use surfmark::attacks::{apply_attack, watermark_count, AttackSpec};
use surfmark::glyph::BoxGeom;
use surfmark::labels::FaceLabel;
use surfmark::metrics::{evaluate, EvaluationInput, ViewSet};
use surfmark::pipeline::{run_with_clock, PipelineConfig};
use surfmark::shapes;
use surfmark::{Mesh, Vec3};
use wasm_bindgen::prelude::*;

/// Built-in input shapes.
pub fn shape(name: &str) -> Result<Mesh, String> {
    match name {
        "sphere" => Ok(shapes::geodesic_sphere(1.0, 16)),
        "torus" => Ok(shapes::torus(1.3, 1.0, 96, 48)),
        "slab" => Ok(shapes::tessellated_box(Vec3::new(30.0, 30.0, 2.0), 1.0)),
        _ => Err(format!("unknown shape `{name}` (expected sphere, torus or slab)")),
    }
}

#[cfg(target_arch = "wasm32")]
fn now() -> f64 {
    js_sys::Date::now() / 1000.0
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> f64 {
    use std::sync::OnceLock;
    static ORIGIN: OnceLock<std::time::Instant> = OnceLock::new();
    ORIGIN.get_or_init(std::time::Instant::now).elapsed().as_secs_f64()
}

/// Demo state, independent of the JavaScript bindings so it can be tested
/// natively.
#[derive(Default)]
pub struct Session {
    original: Option<Mesh>,
    current: Option<Mesh>,
    labels: Option<Vec<FaceLabel>>,
    boxes: Vec<BoxGeom>,
}

impl Session {
    /// Loads a built-in shape without watermarks.
    pub fn load(&mut self, name: &str) -> Result<(), String> {
        let mesh = shape(name)?;
        let cfg = PipelineConfig::default();
        let model = surfmark::pipeline::prepare_model(&mesh, &cfg).map_err(|e| e.to_string())?;
        *self = Session { original: Some(model.clone()), current: Some(model), labels: None, boxes: Vec::new() };
        Ok(())
    }

    /// Runs the pipeline on a built-in shape; returns a JSON summary.
    pub fn watermark(&mut self, name: &str, text: &str, size: f64, mode: &str) -> Result<String, String> {
        let cfg = PipelineConfig { text: text.to_string(), size, mode: mode.parse()?, ..PipelineConfig::default() };
        let out = run_with_clock(&shape(name)?, &cfg, &now).map_err(|e| e.to_string())?;
        let summary = serde_json::json!({
            "candidates": out.manifest.h,
            "selected": out.manifest.selected,
            "watermarks": out.manifest.h_f,
            "coverage": out.manifest.filter.coverage,
            "faces": out.watermarked.face_count(),
            "seconds": out.timings.total,
        });
        *self = Session {
            original: Some(out.original),
            current: Some(out.watermarked),
            labels: Some(out.labels),
            boxes: out.boxes,
        };
        Ok(summary.to_string())
    }

    /// Metrics of the current mesh against the loaded original, as JSON.
    pub fn evaluate(&self) -> Result<String, String> {
        let (Some(original), Some(current)) = (&self.original, &self.current) else {
            return Err("nothing loaded".into());
        };
        let views = ViewSet::new(30.0).map_err(|e| e.to_string())?;
        let report = evaluate(&EvaluationInput {
            original,
            watermarked: current,
            labels: self.labels.as_deref(),
            boxes: &self.boxes,
            views: &views,
            n_rays: 16,
            smse_samples: 5000,
            seed: 42,
        })
        .map_err(|e| e.to_string())?;
        serde_json::to_string(&report).map_err(|e| e.to_string())
    }

    /// Deletes every watermark face, as an unauthorized removal would.
    pub fn remove_watermarks(&mut self) -> Result<String, String> {
        let (Some(current), Some(labels)) = (&self.current, &self.labels) else {
            return Err("no watermarks to remove".into());
        };
        let removed = watermark_count(labels);
        let out = apply_attack(current, Some(labels), &AttackSpec::removal()).map_err(|e| e.to_string())?;
        let (mesh, kept) = (out.mesh, out.labels.unwrap_or_default());
        let summary = serde_json::json!({
            "removed": removed,
            "faces": mesh.face_count(),
            "boundary_edges": mesh.boundary_edge_count(),
        });
        self.current = Some(mesh);
        self.labels = Some(kept);
        Ok(summary.to_string())
    }

    /// Current mesh as a flat triangle list: nine coordinates per face.
    pub fn positions(&self) -> Vec<f32> {
        let Some(mesh) = &self.current else { return Vec::new() };
        let mut out = Vec::with_capacity(mesh.face_count() * 9);
        for f in 0..mesh.face_count() {
            for p in mesh.triangle(f) {
                out.extend([p.x as f32, p.y as f32, p.z as f32]);
            }
        }
        out
    }

    /// Per face: 0 target, 1 watermark side wall, 2 watermark top.
    pub fn face_kinds(&self) -> Vec<u8> {
        let Some(mesh) = &self.current else { return Vec::new() };
        match &self.labels {
            Some(labels) => labels
                .iter()
                .map(|l| match l {
                    FaceLabel::Target => 0,
                    FaceLabel::Watermark { top: false, .. } => 1,
                    FaceLabel::Watermark { top: true, .. } => 2,
                })
                .collect(),
            None => vec![0; mesh.face_count()],
        }
    }
}

/// JavaScript handle around a [`Session`].
#[wasm_bindgen]
#[derive(Default)]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo::default()
    }

    pub fn load(&mut self, shape: &str) -> Result<(), JsError> {
        self.session.load(shape).map_err(|e| JsError::new(&e))
    }

    pub fn watermark(&mut self, shape: &str, text: &str, size: f64, mode: &str) -> Result<String, JsError> {
        self.session.watermark(shape, text, size, mode).map_err(|e| JsError::new(&e))
    }

    pub fn evaluate(&self) -> Result<String, JsError> {
        self.session.evaluate().map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = removeWatermarks)]
    pub fn remove_watermarks(&mut self) -> Result<String, JsError> {
        self.session.remove_watermarks().map_err(|e| JsError::new(&e))
    }

    pub fn positions(&self) -> Vec<f32> {
        self.session.positions()
    }

    #[wasm_bindgen(js_name = faceKinds)]
    pub fn face_kinds(&self) -> Vec<u8> {
        self.session.face_kinds()
    }
}
