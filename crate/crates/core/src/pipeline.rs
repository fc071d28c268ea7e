//! End-to-end watermarking: normalize, place, refine, filter and fuse.

use log::info;
use serde::{Deserialize, Serialize};

use crate::emboss::{curve_matching_fuse, pose_text, FuseMode, PosedWatermark};
use crate::error::{Error, Result};
use crate::filtering::{run_cascade, FilterConfig, FilterTrace};
use crate::glyph::{oriented_bounding_box, text_to_3d, BoxGeom, WatermarkSpec};
use crate::labels::FaceLabel;
use crate::mesh::{cluster_decimate, normalize_model, Mesh, SpatialIndex, WELD_EPS};
use crate::placement::{init_candidates, optimize, CandidateBox, OptimizerOptions};

/// Every tunable of a watermarking run. Field names double as JSON keys
/// and command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_path: Option<String>,
    pub output_path: Option<String>,
    pub text: String,
    pub size: f64,
    pub thickness: f64,
    pub model_scale: f64,
    #[serde(rename = "H_s")]
    pub h_s: usize,
    #[serde(rename = "H_r")]
    pub h_r: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub steps: usize,
    pub stop_loss: f64,
    pub learning_rate: f64,
    pub loss_threshold: f64,
    pub roughness_threshold: f64,
    pub angle_increment: f64,
    pub extrude_strength: f64,
    pub mode: FuseMode,
    pub seed: u64,
    pub vertex_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_path: None,
            output_path: None,
            text: "watermark".into(),
            size: 4.0,
            thickness: 0.5,
            model_scale: 30.0,
            h_s: 300,
            h_r: 1.0,
            j: 179,
            steps: 200,
            stop_loss: 0.005,
            learning_rate: 0.05,
            loss_threshold: 0.005,
            roughness_threshold: 1.25,
            angle_increment: 30.0,
            extrude_strength: 0.05,
            mode: FuseMode::Emboss,
            seed: 42,
            vertex_cap: 80_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("size", self.size),
            ("thickness", self.thickness),
            ("model_scale", self.model_scale),
            ("H_r", self.h_r),
            ("stop_loss", self.stop_loss),
            ("learning_rate", self.learning_rate),
            ("loss_threshold", self.loss_threshold),
            ("roughness_threshold", self.roughness_threshold),
            ("angle_increment", self.angle_increment),
            ("extrude_strength", self.extrude_strength),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("H_s", self.h_s), ("J", self.j), ("steps", self.steps), ("vertex_cap", self.vertex_cap)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        self.optimizer().validate()?;
        self.filter().validate()?;
        self.watermark().validate()
    }

    pub fn watermark(&self) -> WatermarkSpec {
        WatermarkSpec::new(self.text.clone(), self.size, self.thickness)
    }

    pub fn optimizer(&self) -> OptimizerOptions {
        OptimizerOptions {
            max_steps: self.steps,
            stop_mean_loss: self.stop_loss,
            learning_rate: self.learning_rate,
            probe_count: self.j,
        }
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            loss_threshold: self.loss_threshold,
            roughness_threshold: self.roughness_threshold,
            angle_increment: self.angle_increment,
            seed: self.seed,
            ..FilterConfig::default()
        }
    }
}

/// Final pose of one fused watermark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedWatermark {
    pub candidate: usize,
    pub geom: BoxGeom,
    pub params: [f64; 6],
    pub initial_loss: f64,
    pub loss: f64,
    pub steps: usize,
    pub extrusion_normal: [f64; 3],
}

/// Deterministic summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub text: String,
    pub input_vertices: usize,
    pub input_faces: usize,
    pub decimated_vertices: usize,
    /// Candidates after rejection sampling.
    pub h: usize,
    pub initial_losses: Vec<f64>,
    pub losses: Vec<f64>,
    pub filter: FilterTrace,
    /// Candidates surviving the filters.
    pub selected: usize,
    /// Watermarks fused into the output.
    pub h_f: usize,
    pub skipped: Vec<usize>,
    pub watermarks: Vec<PlacedWatermark>,
    pub output_vertices: usize,
    pub output_faces: usize,
    pub output_boundary_edges: usize,
}

/// Wall-clock seconds per stage. Kept apart from the manifest so the
/// manifest stays reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub normalize: f64,
    pub initialize: f64,
    pub optimize: f64,
    pub filter: f64,
    pub fuse: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Input after normalization: the reference for evaluation.
    pub original: Mesh,
    pub watermarked: Mesh,
    pub labels: Vec<FaceLabel>,
    pub boxes: Vec<BoxGeom>,
    pub manifest: Manifest,
    pub timings: Timings,
}

/// Candidates before and after refinement, for inspection and ablations.
#[derive(Clone, Debug)]
pub struct Placement {
    pub model: Mesh,
    pub initial: Vec<CandidateBox>,
    pub refined: Vec<CandidateBox>,
}

/// Normalizes the input to the working scale and welds coincident
/// vertices.
pub fn prepare_model(mesh: &Mesh, cfg: &PipelineConfig) -> Result<Mesh> {
    let m = normalize_model(mesh, cfg.model_scale)?.welded(WELD_EPS);
    if !m.is_watertight() {
        return Err(Error::Pipeline(format!(
            "input mesh must be closed; it has {} boundary edges after welding",
            m.boundary_edge_count()
        )));
    }
    if !(m.signed_volume() > 0.0) {
        return Err(Error::Pipeline("input mesh encloses no volume (inverted or flat)".into()));
    }
    Ok(m)
}

/// Initializes and refines candidates on an already prepared model.
pub fn place_candidates(model: &Mesh, cfg: &PipelineConfig) -> Result<Placement> {
    let text = text_to_3d(&cfg.watermark())?;
    let template = oriented_bounding_box(&text);
    let decimated = cluster_decimate(model, cfg.vertex_cap);
    let index = SpatialIndex::new(&decimated);
    let initial = init_candidates(&decimated, &template, cfg.h_s, cfg.h_r, cfg.seed)?;
    let refined = optimize(initial.clone(), &index, &cfg.optimizer());
    Ok(Placement { model: decimated, initial, refined })
}

/// Runs the whole pipeline on a raw input mesh.
pub fn run(input: &Mesh, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let origin = std::time::Instant::now();
    run_with_clock(input, cfg, &|| origin.elapsed().as_secs_f64())
}

/// [`run`] with a caller-supplied clock in seconds, for targets without
/// `std::time`.
pub fn run_with_clock(input: &Mesh, cfg: &PipelineConfig, now: &dyn Fn() -> f64) -> Result<PipelineOutput> {
    cfg.validate()?;
    let start = now();
    let mut timings = Timings::default();
    let spec = cfg.watermark();
    let text_mesh = text_to_3d(&spec)?;
    let template = oriented_bounding_box(&text_mesh);

    let t = now();
    let model = prepare_model(input, cfg)?;
    let decimated = cluster_decimate(&model, cfg.vertex_cap);
    let index = SpatialIndex::new(&decimated);
    timings.normalize = now() - t;

    let t = now();
    let initial = init_candidates(&decimated, &template, cfg.h_s, cfg.h_r, cfg.seed)?;
    timings.initialize = now() - t;
    info!("{} candidates after rejection sampling", initial.len());

    let t = now();
    let refined = optimize(initial, &index, &cfg.optimizer());
    timings.optimize = now() - t;

    let t = now();
    let (selected, trace, _) = run_cascade(&refined, &decimated, &index, &cfg.filter())?;
    timings.filter = now() - t;
    info!("{} candidates survive filtering", selected.len());
    if selected.is_empty() {
        return Err(Error::Pipeline(format!(
            "no candidate survived filtering (of {}: {} pass the loss threshold, {} roughness, {} saliency, \
             {} overlap, {} occlusion); try shorter text or a smaller size",
            trace.input,
            trace.after_loss,
            trace.after_roughness,
            trace.after_saliency,
            trace.after_overlap,
            trace.after_occlusion
        )));
    }

    let t = now();
    let posed: Vec<PosedWatermark> =
        selected.iter().map(|c| PosedWatermark { mesh: pose_text(&text_mesh, &c.geom), geom: c.geom }).collect();
    let fused = curve_matching_fuse(&model, &posed, cfg.extrude_strength, cfg.mode)?;
    timings.fuse = now() - t;
    if fused.fused.is_empty() {
        return Err(Error::Pipeline("no watermark intersects the model surface".into()));
    }
    timings.total = now() - start;

    let watermarks: Vec<PlacedWatermark> = fused
        .fused
        .iter()
        .zip(&fused.directions)
        .map(|(&i, d)| {
            let c = &selected[i];
            PlacedWatermark {
                candidate: c.id,
                geom: c.geom,
                params: c.params,
                initial_loss: c.initial_loss,
                loss: c.loss,
                steps: c.steps,
                extrusion_normal: [d.x, d.y, d.z],
            }
        })
        .collect();
    let boxes = watermarks.iter().map(|w| w.geom).collect();
    let manifest = Manifest {
        config: cfg.clone(),
        text: spec.normalized_text()?,
        input_vertices: model.vertex_count(),
        input_faces: model.face_count(),
        decimated_vertices: decimated.vertex_count(),
        h: refined.len(),
        initial_losses: refined.iter().map(|c| c.initial_loss).collect(),
        losses: refined.iter().map(|c| c.loss).collect(),
        filter: trace,
        selected: selected.len(),
        h_f: fused.fused.len(),
        skipped: fused.skipped.iter().map(|&i| selected[i].id).collect(),
        watermarks,
        output_vertices: fused.mesh.vertex_count(),
        output_faces: fused.mesh.face_count(),
        output_boundary_edges: fused.mesh.boundary_edge_count(),
    };
    Ok(PipelineOutput { original: model, watermarked: fused.mesh, labels: fused.labels, boxes, manifest, timings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg = PipelineConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"H_s\":300") && s.contains("\"J\":179") && s.contains("\"mode\":\"emboss\""));
        let back: PipelineConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"text":"ab","mode":"deboss"}"#).unwrap();
        assert_eq!(partial.mode, FuseMode::Deboss);
        assert_eq!(partial.steps, 200);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"colour":1}"#).is_err());
        assert!(cfg.validate().is_ok());
        assert!(PipelineConfig { size: 0.0, ..cfg.clone() }.validate().is_err());
        assert!(PipelineConfig { text: "€".into(), ..cfg }.validate().is_err());
    }

    #[test]
    fn open_input_is_rejected() {
        let plane = crate::shapes::plane_grid(10.0, 4);
        assert!(matches!(prepare_model(&plane, &PipelineConfig::default()), Err(Error::Pipeline(_))));
    }
}
