use crate::model::{LabelFrame, MAX_USER_LABEL};

use super::{CodecError, Plane};

/// Luma distance between consecutive label codes; 15 * 17 = 255.
pub const LABEL_SPACING: u8 = 17;

/// Spreads user ids 0..=15 over the full luma range so that codec noise
/// below half the spacing cannot turn one id into another.
pub fn encode_labels(frame: &LabelFrame) -> Result<Plane, CodecError> {
    let data = frame
        .data
        .iter()
        .map(|&v| {
            if v > MAX_USER_LABEL {
                Err(CodecError::LabelOutOfRange(v))
            } else {
                Ok(v * LABEL_SPACING)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Plane::new(frame.width, frame.height, data)
}

pub fn decode_labels(plane: &Plane) -> LabelFrame {
    let data = plane
        .data
        .iter()
        .map(|&y| {
            let v = (y as f64 / LABEL_SPACING as f64).round() as u8;
            v.min(MAX_USER_LABEL)
        })
        .collect();
    LabelFrame {
        width: plane.width,
        height: plane.height,
        data,
    }
}
