//! Coding of depth and label rasters into 8-bit planes that survive a lossy
//! image codec, plus the in-repo reference lossy codec itself.

mod depth;
mod labels;
mod lossy;

pub use depth::{
    channels_to_depth, depth_to_channels, downscale_min2x2, pack_depth, tri, unpack_depth,
    DepthPackingParams, PackedDepthFrame,
};
pub use labels::{decode_labels, encode_labels, LABEL_SPACING};
pub use lossy::{
    lossy_decode, lossy_decode_prefix, lossy_encode, lossy_encode_into, stream_is_predicted,
    CodecQuality, LOSSY_HEADER_LEN, LOSSY_MAGIC, LOSSY_VERSION, MAX_DEADZONE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid packing parameters: {0}")]
    InvalidParams(String),
    #[error("plane dimensions {0}x{1} do not match {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("label value {0} exceeds 15")]
    LabelOutOfRange(u8),
    #[error("deadzone {0} outside [0, 32]")]
    InvalidDeadzone(u8),
    #[error("bad magic byte {0:#04x}")]
    BadMagic(u8),
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("stream truncated at byte {0}")]
    Truncated(usize),
    #[error("stream is predicted but no reference plane was supplied")]
    MissingReference,
    #[error("invalid token {token:#04x} at byte {offset}")]
    BadToken { token: u8, offset: usize },
    #[error("run at byte {offset} overruns the plane")]
    Overrun { offset: usize },
    #[error("invalid prediction flag {0}")]
    BadPredictionFlag(u8),
}

/// A row-major 8-bit image plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, CodecError> {
        if width * height != data.len() {
            return Err(CodecError::DimensionMismatch(width, height, data.len(), 1));
        }
        Ok(Plane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Largest per-pixel absolute difference.
    pub fn max_abs_diff(&self, other: &Plane) -> u8 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }
}
