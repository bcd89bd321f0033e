use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NonSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("input contains NaN or infinite entries")]
    NonFinite,

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse line {line}, column {column}: {value:?}")]
    Parse {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("dataset contains no samples")]
    EmptyDataset,

    #[error("at least two classes are required")]
    SingleClass,

    #[error("bad magic number in {}: expected {expected:#010x}, found {found:#010x}", path.display())]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("{} is truncated: expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("class {class} has {available} samples, split requests {train} train + {test} test")]
    InsufficientSamples {
        class: usize,
        available: usize,
        train: usize,
        test: usize,
    },

    #[error("trade-off parameter gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),

    #[error("requested {requested} directions but only {available} are available")]
    RankDeficient { requested: usize, available: usize },

    #[error("requested {requested} directions but only {available} have positive margin")]
    InsufficientPositiveSpectrum { requested: usize, available: usize },

    #[error("cannot select t = {t} samples from n = {n}")]
    TTooLarge { t: usize, n: usize },

    #[error("target dimension r = {r} exceeds the number of selected samples t = {t}")]
    RTooLarge { r: usize, t: usize },

    #[error("layer {layer}: target dimension {r} exceeds current dimension {d}")]
    DimensionCollapse { layer: usize, r: usize, d: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("patch size must be at least 1x1, got {k1}x{k2}")]
    EmptyKernel { k1: usize, k2: usize },

    #[error("requested {requested} filters but patches only have {available} dimensions")]
    TooManyFilters { requested: usize, available: usize },

    #[error("block {block_h}x{block_w} does not fit in a {map_h}x{map_w} map")]
    BlockTooLarge {
        block_h: usize,
        block_w: usize,
        map_h: usize,
        map_w: usize,
    },

    #[error("k = {k} exceeds the number of training samples {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Stable variant name, used in machine-readable error output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonSymmetric { .. } => "NonSymmetric",
            Error::NonFinite => "NonFinite",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
            Error::EmptyDataset => "EmptyDataset",
            Error::SingleClass => "SingleClass",
            Error::BadMagic { .. } => "BadMagic",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::Truncated { .. } => "Truncated",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::NegativeGamma(_) => "NegativeGamma",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::InsufficientPositiveSpectrum { .. } => "InsufficientPositiveSpectrum",
            Error::TTooLarge { .. } => "TTooLarge",
            Error::RTooLarge { .. } => "RTooLarge",
            Error::DimensionCollapse { .. } => "DimensionCollapse",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyKernel { .. } => "EmptyKernel",
            Error::TooManyFilters { .. } => "TooManyFilters",
            Error::BlockTooLarge { .. } => "BlockTooLarge",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidParam(_) => "InvalidParam",
            Error::ConfigInvalid { .. } => "ConfigInvalid",
            Error::Json(_) => "Json",
        }
    }

    /// Module that owns the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::NonSymmetric { .. } | Error::NonFinite => "numerics",
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::BadMagic { .. }
            | Error::CountMismatch { .. }
            | Error::Truncated { .. }
            | Error::InsufficientSamples { .. } => "data",
            Error::SingleClass | Error::NegativeGamma(_) => "scatter",
            Error::RankDeficient { .. } | Error::InsufficientPositiveSpectrum { .. } => "mmc_core",
            Error::TTooLarge { .. } | Error::RTooLarge { .. } | Error::DimensionCollapse { .. } => {
                "mmc_variants"
            }
            Error::EmptyKernel { .. }
            | Error::TooManyFilters { .. }
            | Error::BlockTooLarge { .. } => "mmc_net",
            Error::KTooLarge { .. } | Error::LengthMismatch { .. } => "eval",
            Error::ConfigInvalid { .. } | Error::Json(_) => "cli",
            Error::ShapeMismatch(_) | Error::InvalidParam(_) => "core",
        }
    }
}
