//! Visible 3D text watermarks for triangle meshes.
//!
//! The pipeline renders a text string as a closed 3D solid, searches the
//! surface of a target mesh for places where the text box lies flush,
//! filters those placements for visibility, and embeds the text with
//! boolean mesh operations. Metrics and attacks are provided to evaluate
//! the result.

// Negated comparisons such as `!(x > 0.0)` are used on purpose: they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod csg;
pub mod emboss;
pub mod error;
pub mod filtering;
pub mod glyph;
pub mod labels;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod placement;
pub mod shapes;

pub use error::{Error, Result};
pub use mesh::{Mesh, Point, Vec3};
