use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("OBJ parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },

    #[error("mesh has no vertices")]
    EmptyMesh,

    #[error("mesh has zero total surface area")]
    ZeroArea,

    #[error("mesh is degenerate: {0}")]
    Degenerate(String),

    #[error("unsupported watermark character(s): {0}")]
    UnsupportedCharacter(String),

    #[error("invalid watermark specification: {0}")]
    InvalidWatermark(String),

    #[error("no candidate survived rejection sampling with radius {radius}; try a smaller radius")]
    NoCandidates { radius: f64 },

    #[error("boolean operand {operand} is not watertight ({boundary_edges} boundary edges)")]
    NotWatertight { operand: &'static str, boundary_edges: usize },

    #[error("boolean classification failed: {0}")]
    Classification(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pipeline failure: {0}")]
    Pipeline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
