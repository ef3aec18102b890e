//! Reference lossy plane codec.
//!
//! Each pixel is predicted from the reference plane (or mid-gray), the
//! residual is quantized with step `2 * deadzone + 1`, and the quantized
//! residuals are run-length coded. Stream layout, all integers
//! little-endian:
//!
//! ```text
//! 0xC5 | 0x01 | width u16 | height u16 | deadzone u8 | predicted u8 | tokens...
//! token 0x00, varint n           n zero residuals
//! token 0x01, varint n, n bytes  n signed residual bytes
//! ```
//!
//! Varints are unsigned LEB128. The token stream ends exactly at
//! `width * height` residuals.

use super::{CodecError, Plane};

pub const LOSSY_MAGIC: u8 = 0xC5;
pub const LOSSY_VERSION: u8 = 0x01;
pub const LOSSY_HEADER_LEN: usize = 8;
pub const MAX_DEADZONE: u8 = 32;

const TOKEN_ZEROS: u8 = 0x00;
const TOKEN_LITERAL: u8 = 0x01;
/// Zero runs shorter than this are folded into literal runs.
const MIN_ZERO_RUN: usize = 3;
const INTRA_PREDICTION: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecQuality {
    pub deadzone: u8,
}

impl CodecQuality {
    pub const LOSSLESS: CodecQuality = CodecQuality { deadzone: 0 };

    pub fn new(deadzone: u8) -> Result<Self, CodecError> {
        if deadzone > MAX_DEADZONE {
            return Err(CodecError::InvalidDeadzone(deadzone));
        }
        Ok(CodecQuality { deadzone })
    }

    fn step(self) -> i32 {
        2 * self.deadzone as i32 + 1
    }
}

fn reconstruct(pred: u8, q: i8, step: i32) -> u8 {
    if step == 1 {
        pred.wrapping_add(q as u8)
    } else {
        (pred as i32 + q as i32 * step).clamp(0, 255) as u8
    }
}

fn quantize(value: u8, pred: u8, step: i32) -> i8 {
    if step == 1 {
        value.wrapping_sub(pred) as i8
    } else {
        let r = value as i32 - pred as i32;
        // Round half away from zero; |q| <= 255 / 3 fits in i8.
        let q = (r.abs() + step / 2) / step * r.signum();
        q as i8
    }
}

fn write_varint(out: &mut Vec<u8>, mut n: u64) {
    loop {
        let byte = (n & 0x7f) as u8;
        n >>= 7;
        if n == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let mut value = 0u64;
    for shift in (0..35).step_by(7) {
        let b = *bytes.get(*pos).ok_or(CodecError::Truncated(*pos))?;
        *pos += 1;
        value |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(CodecError::BadToken {
        token: bytes[*pos - 1],
        offset: *pos - 1,
    })
}

pub fn lossy_encode(
    plane: &Plane,
    reference: Option<&Plane>,
    quality: CodecQuality,
) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    lossy_encode_into(plane, reference, quality, &mut out)?;
    Ok(out)
}

/// Appends one encoded stream to `out`.
pub fn lossy_encode_into(
    plane: &Plane,
    reference: Option<&Plane>,
    quality: CodecQuality,
    out: &mut Vec<u8>,
) -> Result<(), CodecError> {
    let quality = CodecQuality::new(quality.deadzone)?;
    if plane.width > u16::MAX as usize || plane.height > u16::MAX as usize {
        return Err(CodecError::DimensionMismatch(
            plane.width,
            plane.height,
            u16::MAX as usize,
            u16::MAX as usize,
        ));
    }
    if let Some(r) = reference {
        if !r.same_shape(plane) {
            return Err(CodecError::DimensionMismatch(
                r.width,
                r.height,
                plane.width,
                plane.height,
            ));
        }
    }
    let step = quality.step();
    out.push(LOSSY_MAGIC);
    out.push(LOSSY_VERSION);
    out.extend_from_slice(&(plane.width as u16).to_le_bytes());
    out.extend_from_slice(&(plane.height as u16).to_le_bytes());
    out.push(quality.deadzone);
    out.push(reference.is_some() as u8);

    let residuals: Vec<i8> = match reference {
        Some(r) => plane
            .data
            .iter()
            .zip(&r.data)
            .map(|(&v, &p)| quantize(v, p, step))
            .collect(),
        None => plane
            .data
            .iter()
            .map(|&v| quantize(v, INTRA_PREDICTION, step))
            .collect(),
    };

    let mut i = 0;
    let mut literal_start: Option<usize> = None;
    let flush_literal = |out: &mut Vec<u8>, start: usize, end: usize| {
        out.push(TOKEN_LITERAL);
        write_varint(out, (end - start) as u64);
        out.extend(residuals[start..end].iter().map(|&q| q as u8));
    };
    while i < residuals.len() {
        if residuals[i] == 0 {
            let run = residuals[i..].iter().take_while(|&&q| q == 0).count();
            if run >= MIN_ZERO_RUN {
                if let Some(s) = literal_start.take() {
                    flush_literal(out, s, i);
                }
                out.push(TOKEN_ZEROS);
                write_varint(out, run as u64);
                i += run;
                continue;
            }
            literal_start.get_or_insert(i);
            i += run;
        } else {
            literal_start.get_or_insert(i);
            i += 1;
        }
    }
    if let Some(s) = literal_start {
        flush_literal(out, s, residuals.len());
    }
    Ok(())
}

/// True when the stream starting at `bytes` predicts from a reference plane.
pub fn stream_is_predicted(bytes: &[u8]) -> Option<bool> {
    if bytes.len() < LOSSY_HEADER_LEN || bytes[0] != LOSSY_MAGIC {
        return None;
    }
    Some(bytes[7] == 1)
}

pub fn lossy_decode(bytes: &[u8], reference: Option<&Plane>) -> Result<Plane, CodecError> {
    let (plane, used) = lossy_decode_prefix(bytes, reference)?;
    if used != bytes.len() {
        return Err(CodecError::BadToken {
            token: bytes[used],
            offset: used,
        });
    }
    Ok(plane)
}

/// Decodes one stream from the front of `bytes`, returning the plane and the
/// number of bytes consumed.
pub fn lossy_decode_prefix(
    bytes: &[u8],
    reference: Option<&Plane>,
) -> Result<(Plane, usize), CodecError> {
    if bytes.is_empty() {
        return Err(CodecError::Truncated(0));
    }
    if bytes[0] != LOSSY_MAGIC {
        return Err(CodecError::BadMagic(bytes[0]));
    }
    if bytes.len() < LOSSY_HEADER_LEN {
        return Err(CodecError::Truncated(bytes.len()));
    }
    if bytes[1] != LOSSY_VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[1]));
    }
    let width = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
    let height = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let quality = CodecQuality::new(bytes[6])?;
    let reference = match bytes[7] {
        0 => None,
        1 => {
            let r = reference.ok_or(CodecError::MissingReference)?;
            if r.width != width || r.height != height {
                return Err(CodecError::DimensionMismatch(r.width, r.height, width, height));
            }
            Some(r)
        }
        other => return Err(CodecError::BadPredictionFlag(other)),
    };
    let step = quality.step();
    let total = width * height;
    let mut data = Vec::with_capacity(total);
    let mut pos = LOSSY_HEADER_LEN;
    let pred = |i: usize| reference.map_or(INTRA_PREDICTION, |r| r.data[i]);
    while data.len() < total {
        let token_at = pos;
        let token = *bytes.get(pos).ok_or(CodecError::Truncated(pos))?;
        pos += 1;
        let n = read_varint(bytes, &mut pos)? as usize;
        if n == 0 || n > total - data.len() {
            return Err(CodecError::Overrun { offset: token_at });
        }
        match token {
            TOKEN_ZEROS => {
                for _ in 0..n {
                    let i = data.len();
                    data.push(reconstruct(pred(i), 0, step));
                }
            }
            TOKEN_LITERAL => {
                let run = bytes
                    .get(pos..pos + n)
                    .ok_or(CodecError::Truncated(bytes.len()))?;
                pos += n;
                for &b in run {
                    let i = data.len();
                    data.push(reconstruct(pred(i), b as i8, step));
                }
            }
            other => {
                return Err(CodecError::BadToken {
                    token: other,
                    offset: token_at,
                })
            }
        }
    }
    Ok((Plane { width, height, data }, pos))
}
