use std::path::PathBuf;

use thiserror::Error;

use crate::figure::{PartLabel, ShapeClass};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("affine transform is singular (|det| = {det:e})")]
    SingularTransform { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape class {class:?} has {available} samples, {required} required")]
    InsufficientCorpus {
        class: Option<ShapeClass>,
        available: usize,
        required: usize,
    },

    #[error("shape class {class:?} has a rank-0 corpus (all crops identical)")]
    DegenerateCorpus { class: ShapeClass },

    #[error("no shape space for class {0:?}")]
    MissingShapeClass(ShapeClass),

    #[error("neighbor set is empty")]
    EmptyNeighborSet,

    #[error("mask for {0:?} has no foreground pixels")]
    EmptyMask(PartLabel),

    #[error("heatmap is flat")]
    FlatHeatmap,

    #[error("reference part (TopClothes) is absent")]
    MissingReferencePart,

    #[error("structure energy is not finite")]
    NonFiniteEnergy,

    #[error("figure {figure} has zero shoulder width")]
    DegenerateReference { figure: usize },

    #[error("figure spec out of bounds: {0}")]
    SpecOutOfBounds(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("label map contains invalid code {code} at {count} pixel(s)")]
    BadLabelCode { code: u8, count: usize },

    #[error("size mismatch: sketch is {sketch:?}, labels are {labels:?}")]
    SizeMismatch {
        sketch: (u32, u32),
        labels: (u32, u32),
    },

    #[error("{what} must be an 8-bit single-channel PNG, found {found}")]
    BadPixelFormat { what: String, found: String },

    #[error("bad magic {found:?}, expected \"FRIX\"")]
    BadMagic { found: [u8; 4] },

    #[error("index version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumFailure { stored: u64, computed: u64 },

    #[error("index file is truncated")]
    TruncatedFile,

    #[error("palette has no color for label code {0}")]
    PaletteMissingLabel(u8),

    #[error("sketch has no present parts")]
    EmptySketch,

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("malformed keypoints: {0}")]
    BadKeypoints(String),

    #[error("image decode/encode failed: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code surfaced by the CLI and HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SingularTransform { .. } => "singular_transform",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InsufficientCorpus { .. } => "insufficient_corpus",
            Error::DegenerateCorpus { .. } => "degenerate_corpus",
            Error::MissingShapeClass(_) => "missing_shape_class",
            Error::EmptyNeighborSet => "empty_neighbor_set",
            Error::EmptyMask(_) => "empty_mask",
            Error::FlatHeatmap => "flat_heatmap",
            Error::MissingReferencePart => "missing_reference_part",
            Error::NonFiniteEnergy => "non_finite_energy",
            Error::DegenerateReference { .. } => "degenerate_reference",
            Error::SpecOutOfBounds(_) => "spec_out_of_bounds",
            Error::MissingFile(_) => "missing_file",
            Error::BadLabelCode { .. } => "bad_label_code",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::BadPixelFormat { .. } => "bad_pixel_format",
            Error::BadMagic { .. } => "bad_magic",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::ChecksumFailure { .. } => "checksum_failure",
            Error::TruncatedFile => "truncated_file",
            Error::PaletteMissingLabel(_) => "palette_missing_label",
            Error::EmptySketch => "empty_sketch",
            Error::InvalidRequest(_) => "invalid_request",
            Error::BadKeypoints(_) => "bad_keypoints",
            Error::Image(_) => "bad_image",
            Error::Io(_) => "io_error",
            Error::Json(_) => "bad_json",
        }
    }

    /// True when the error stems from caller-supplied data rather than an
    /// internal fault.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NonFiniteEnergy | Error::Io(_))
    }
}
