use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("failed to encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("no frames matching pattern {pattern:?} in {dir}")]
    EmptySequence { dir: PathBuf, pattern: String },

    #[error("non-contiguous frame indices in {dir}: expected {expected}, found {found}")]
    NonContiguousIndices {
        dir: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("mixed frame dimensions: frame {index} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    MixedDimensions {
        index: usize,
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },

    #[error("dimension mismatch in {context}: {left_h}x{left_w} vs {right_h}x{right_w}")]
    DimensionMismatch {
        context: &'static str,
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("frame {h}x{w} is smaller than one {side}x{side} patch")]
    FrameTooSmall { h: usize, w: usize, side: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid frame data: {0}")]
    InvalidFrame(String),

    #[error("invalid interval [{l}, {r}] for {n} frames")]
    InvalidInterval { l: usize, r: usize, n: usize },

    #[error("keyframe index {index} out of range for {len} frames")]
    KeyframeOutOfRange { index: usize, len: usize },

    #[error("keyframe list is empty or not strictly increasing")]
    BadKeyframes,

    #[error("video length mismatch: guide has {guide} frames, style has {style}")]
    LengthMismatch { guide: usize, style: usize },
}
