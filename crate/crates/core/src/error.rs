use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("face {face}: {what} index {index} out of range (have {len})")]
    IndexOutOfRange { face: usize, what: &'static str, index: usize, len: usize },

    #[error("face {face} is degenerate ({what})")]
    DegenerateFace { face: usize, what: &'static str },

    #[error("meshes differ in connectivity: {0}")]
    ConnectivityMismatch(String),

    #[error("point coincides with the camera aperture")]
    AtAperture,

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("degenerate uv triangle (area {area:e})")]
    DegenerateUvTriangle { area: f64 },

    #[error("singular triangulation system (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("need at least {need} rays, got {got}")]
    TooFewRays { need: usize, got: usize },

    #[error("seed set is empty")]
    EmptySeeds,

    #[error("field has no assigned vertices")]
    NoAssigned,

    #[error("uv conventions appear mismatched: {bad} of {assigned} assigned displacements exceed 0.5")]
    UvConventionMismatch { bad: usize, assigned: usize },

    #[error("face subset is empty")]
    EmptyPatch,

    #[error("face {0} has no side tag")]
    MissingSideTag(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("parameter {param} outside the layout domain: {why}")]
    OutOfDomain { param: String, why: String },

    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_string(), msg: msg.into() }
    }
}
