use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the radar/fusion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A scatterer would alias in range or velocity under the given config.
    #[error("scatterer rejected: {0}")]
    Rejected(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("array layout error: {0}")]
    Layout(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("BEV grid is at stage {found:?}, expected {expected:?}")]
    Stage {
        expected: crate::fusion::BevStage,
        found: crate::fusion::BevStage,
    },

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("toml decode: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml encode: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
