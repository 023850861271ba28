use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {left:?} vs {right:?} (width, height)")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("degenerate least-squares fit: valid pixels span rank {rank}, need 3")]
    DegenerateFit { rank: usize },

    #[error("matrix is not invertible (det = {det:e})")]
    Singular { det: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("median intensity is zero; cannot derive an exposure")]
    ZeroMedian,

    #[error(transparent)]
    Pfm(#[from] PfmError),

    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),

    #[error("external process failed: {message}")]
    External { message: String, stderr: String },

    #[error(transparent)]
    Manifest(#[from] ManifestError),

    #[error("transport cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("records file contains no records")]
    EmptyRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parse failures for portable float maps.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PfmError {
    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PFM variant {0:?} (only 3-channel \"PF\" is read)")]
    UnsupportedVariant(String),
    #[error("big-endian PFM payloads are not supported (scale {0})")]
    UnsupportedEndianness(String),
    #[error("truncated PFM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// One schema problem found while validating a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoScenes,
    MissingAwb { scene: String, awb: String },
    DuplicateSetting { scene: String, setting: String },
    DuplicateScene { scene: String },
    EmptyName { scene: String },
    CropCount { scene: String, setting: String, found: usize, expected: usize },
    DanglingPath { scene: String, path: PathBuf },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NoScenes => write!(f, "manifest lists no scenes"),
            Violation::MissingAwb { scene, awb } => {
                write!(f, "scene {scene}: AWB setting {awb:?} is not among its settings")
            }
            Violation::DuplicateSetting { scene, setting } => {
                write!(f, "scene {scene}: duplicate setting name {setting:?}")
            }
            Violation::DuplicateScene { scene } => write!(f, "duplicate scene id {scene:?}"),
            Violation::EmptyName { scene } => write!(f, "scene {scene}: empty setting name"),
            Violation::CropCount { scene, setting, found, expected } => write!(
                f,
                "scene {scene}, setting {setting}: {found} crops, expected {expected}"
            ),
            Violation::DanglingPath { scene, path } => {
                write!(f, "scene {scene}: missing file {}", path.display())
            }
        }
    }
}

#[derive(Debug, Error)]
pub struct ManifestError {
    pub violations: Vec<Violation>,
}

impl std::fmt::Display for ManifestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "manifest failed validation ({} problems)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}
