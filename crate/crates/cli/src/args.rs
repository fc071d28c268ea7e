//! Command-line syntax.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use surfmark::attacks::AttackKind;
use surfmark::emboss::FuseMode;
use surfmark::pipeline::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "surfmark", version, about = "Visible 3D text watermarks for triangle meshes")]
pub struct Cli {
    /// Log pipeline progress to standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed text watermarks into a closed OBJ mesh.
    Watermark(Box<WatermarkArgs>),
    /// Compute quality metrics for a watermarked mesh.
    Evaluate(EvaluateArgs),
    /// Apply a crop or removal attack to a watermarked mesh.
    Attack(AttackArgs),
}

/// Overrides for every [`PipelineConfig`] field; flag names match the JSON keys.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    #[arg(long = "input_path", visible_alias = "input")]
    pub input_path: Option<String>,
    #[arg(long = "output_path", visible_alias = "output")]
    pub output_path: Option<String>,
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long)]
    pub size: Option<f64>,
    #[arg(long)]
    pub thickness: Option<f64>,
    #[arg(long = "model_scale")]
    pub model_scale: Option<f64>,
    #[arg(long = "H_s")]
    pub h_s: Option<usize>,
    #[arg(long = "H_r")]
    pub h_r: Option<f64>,
    #[arg(long = "J")]
    pub j: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "stop_loss")]
    pub stop_loss: Option<f64>,
    #[arg(long = "learning_rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "loss_threshold")]
    pub loss_threshold: Option<f64>,
    #[arg(long = "roughness_threshold")]
    pub roughness_threshold: Option<f64>,
    #[arg(long = "angle_increment")]
    pub angle_increment: Option<f64>,
    #[arg(long = "extrude_strength")]
    pub extrude_strength: Option<f64>,
    #[arg(long)]
    pub mode: Option<FuseMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "vertex_cap")]
    pub vertex_cap: Option<usize>,
}

impl ConfigFlags {
    pub fn apply(self, cfg: &mut PipelineConfig) {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if self.input_path.is_some() {
            cfg.input_path = self.input_path;
        }
        if self.output_path.is_some() {
            cfg.output_path = self.output_path;
        }
        set(&mut cfg.text, self.text);
        set(&mut cfg.size, self.size);
        set(&mut cfg.thickness, self.thickness);
        set(&mut cfg.model_scale, self.model_scale);
        set(&mut cfg.h_s, self.h_s);
        set(&mut cfg.h_r, self.h_r);
        set(&mut cfg.j, self.j);
        set(&mut cfg.steps, self.steps);
        set(&mut cfg.stop_loss, self.stop_loss);
        set(&mut cfg.learning_rate, self.learning_rate);
        set(&mut cfg.loss_threshold, self.loss_threshold);
        set(&mut cfg.roughness_threshold, self.roughness_threshold);
        set(&mut cfg.angle_increment, self.angle_increment);
        set(&mut cfg.extrude_strength, self.extrude_strength);
        set(&mut cfg.mode, self.mode);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.vertex_cap, self.vertex_cap);
    }
}

#[derive(Debug, Args)]
pub struct WatermarkArgs {
    /// JSON file with pipeline settings; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Face label sidecar [default: <output>.labels.txt].
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Run manifest [default: <output>.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-stage wall-clock timings [default: <output>.timings.json].
    #[arg(long)]
    pub timings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference mesh.
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub watermarked: PathBuf,
    /// Face label sidecar of the watermarked mesh; enables LCE.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Run manifest: supplies the watermark boxes and normalizes the
    /// original into the watermarked mesh's frame.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Fail unless LCE can be computed.
    #[arg(long)]
    pub lce: bool,
    /// JSON report [default: <watermarked>.report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// View spacing in degrees.
    #[arg(long = "angle_increment", default_value_t = 30.0)]
    pub angle_increment: f64,
    /// Rays per watermark and view.
    #[arg(long = "n_rays", default_value_t = 16)]
    pub n_rays: usize,
    /// Surface samples for SMSE.
    #[arg(long = "smse_samples", default_value_t = 20_000)]
    pub smse_samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Watermarked mesh.
    #[arg(long)]
    pub input: PathBuf,
    /// Face label sidecar of the input (required for removal).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// `crop` or `removal`.
    #[arg(long)]
    pub kind: AttackKind,
    /// Crop plane as `px,py,pz,nx,ny,nz`; the normal side is removed.
    #[arg(long, value_parser = parse_floats::<6>, allow_hyphen_values = true)]
    pub plane: Option<[f64; 6]>,
    /// Volume fraction to keep when cropping without an explicit plane.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Cut axis for fraction crops, `x,y,z`.
    #[arg(long, value_parser = parse_floats::<3>, allow_hyphen_values = true, default_value = "0,0,1")]
    pub axis: [f64; 3],
    #[arg(long)]
    pub output: PathBuf,
    /// Labels of the attacked mesh [default: <output>.labels.txt when a
    /// sidecar was given].
    #[arg(long = "sidecar_out")]
    pub sidecar_out: Option<PathBuf>,
}

/// Parses exactly `N` comma-separated numbers.
fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}
