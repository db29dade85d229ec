//! Texture sliding for cloth: displacement fields that move texture
//! coordinates on an inferred mesh so it renders like the ground truth, the
//! decoder network that predicts them, and the multi-view tools built on top.

pub mod camera;
pub mod error;
pub mod extrapolate;
pub mod field;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod pixelmap;
pub mod reconstruct;
pub mod scalar;
pub mod scene;
pub mod spatial;
pub mod synth;
pub mod tsgen;
pub mod tsnn;
pub mod viewinterp;
pub mod visibility;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::TexturedMesh<f64>;
pub type Mesh32 = mesh::TexturedMesh<f32>;
pub type Field64 = field::TsField<f64>;
pub type Field32 = field::TsField<f32>;
pub type Camera64 = camera::Camera<f64>;
pub type Camera32 = camera::Camera<f32>;
pub type Image64 = pixelmap::PixelImage<f64>;
pub type Image32 = pixelmap::PixelImage<f32>;
pub type Model64 = tsnn::DecoderModel<f64>;
pub type Model32 = tsnn::DecoderModel<f32>;
pub type Suite64 = synth::Suite<f64>;
pub type Suite32 = synth::Suite<f32>;
