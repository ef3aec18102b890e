use crate::model::DepthFrame;

use super::{CodecError, Plane};

/// Triangle-wave depth packing parameters.
///
/// `range` is the full depth scale (65536 for 16-bit depth). `period` is the
/// length of one triangle period of the fine channels, in depth units; it
/// must be even so the quarter-period phase shift falls on whole units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthPackingParams {
    pub range: u32,
    pub period: u32,
}

impl Default for DepthPackingParams {
    fn default() -> Self {
        DepthPackingParams {
            range: 65536,
            period: 512,
        }
    }
}

impl DepthPackingParams {
    pub fn check(&self) -> Result<(), CodecError> {
        if self.range != 65536 {
            return Err(CodecError::InvalidParams(format!(
                "range must be 65536 for 16-bit depth, got {}",
                self.range
            )));
        }
        if self.period < 2 || self.period % 2 != 0 || self.period > self.range {
            return Err(CodecError::InvalidParams(format!(
                "period must be a positive even integer <= range, got {}",
                self.period
            )));
        }
        Ok(())
    }

    /// Number of complete fine-channel periods across the full range.
    pub fn periods_per_range(&self) -> f64 {
        self.range as f64 / self.period as f64
    }

    fn phase(&self, d: f64) -> f64 {
        2.0 * d / self.period as f64
    }
}

/// Triangle wave with period 2 and range [0, 1]; `tri(0) = 0`, `tri(1) = 1`.
pub fn tri(x: f64) -> f64 {
    1.0 - (x.rem_euclid(2.0) - 1.0).abs()
}

/// Real-valued channels `(L, Ha, Hb)` in [0, 1] for one depth value.
pub fn depth_to_channels(d: u16, params: &DepthPackingParams) -> [f64; 3] {
    let x = params.phase(d as f64);
    [d as f64 / params.range as f64, tri(x), tri(x - 0.5)]
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let t = (a - b).rem_euclid(2.0);
    t.min(2.0 - t)
}

/// Inverts [`depth_to_channels`]; exact on unquantized channels.
///
/// The two fine channels each give the phase within a period up to a
/// reflection. The channel farther from its fold (closer to 0.5) fixes the
/// phase; the other channel picks the reflection. The coarse channel then
/// selects the period.
pub fn channels_to_depth(c: [f64; 3], params: &DepthPackingParams) -> u16 {
    let [l, ha, hb] = c;
    let from_a = [ha.rem_euclid(2.0), (2.0 - ha).rem_euclid(2.0)];
    let from_b = [(hb + 0.5).rem_euclid(2.0), (2.5 - hb).rem_euclid(2.0)];
    let (primary, secondary) = if (ha - 0.5).abs() <= (hb - 0.5).abs() {
        (from_a, from_b)
    } else {
        (from_b, from_a)
    };
    let mismatch = |p: f64| {
        secondary
            .iter()
            .map(|&s| circular_distance(p, s))
            .fold(f64::INFINITY, f64::min)
    };
    let phase = if mismatch(primary[0]) <= mismatch(primary[1]) {
        primary[0]
    } else {
        primary[1]
    };
    let coarse = params.phase(l * params.range as f64);
    let k = ((coarse - phase) / 2.0).round();
    let x = phase + 2.0 * k;
    let d = (x * params.period as f64 / 2.0).round();
    d.clamp(0.0, (params.range - 1) as f64) as u16
}

fn quantize(v: f64) -> u8 {
    (255.0 * v).round().clamp(0.0, 255.0) as u8
}

/// Three 8-bit planes carrying one depth frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedDepthFrame {
    pub coarse: Plane,
    pub fine_a: Plane,
    pub fine_b: Plane,
}

impl PackedDepthFrame {
    pub fn width(&self) -> usize {
        self.coarse.width
    }

    pub fn height(&self) -> usize {
        self.coarse.height
    }
}

pub fn pack_depth(
    frame: &DepthFrame,
    params: &DepthPackingParams,
) -> Result<PackedDepthFrame, CodecError> {
    params.check()?;
    let n = frame.data.len();
    let (mut l, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &d in &frame.data {
        let [cl, ca, cb] = depth_to_channels(d, params);
        l.push(quantize(cl));
        a.push(quantize(ca));
        b.push(quantize(cb));
    }
    let (w, h) = (frame.width, frame.height);
    Ok(PackedDepthFrame {
        coarse: Plane::new(w, h, l)?,
        fine_a: Plane::new(w, h, a)?,
        fine_b: Plane::new(w, h, b)?,
    })
}

pub fn unpack_depth(
    packed: &PackedDepthFrame,
    params: &DepthPackingParams,
) -> Result<DepthFrame, CodecError> {
    params.check()?;
    let (w, h) = (packed.coarse.width, packed.coarse.height);
    for p in [&packed.fine_a, &packed.fine_b] {
        if !p.same_shape(&packed.coarse) || p.data.len() != w * h {
            return Err(CodecError::DimensionMismatch(p.width, p.height, w, h));
        }
    }
    if packed.coarse.data.len() != w * h {
        return Err(CodecError::DimensionMismatch(w, h, packed.coarse.data.len(), 1));
    }
    let data = packed
        .coarse
        .data
        .iter()
        .zip(&packed.fine_a.data)
        .zip(&packed.fine_b.data)
        .map(|((&l, &a), &b)| {
            channels_to_depth(
                [l as f64 / 255.0, a as f64 / 255.0, b as f64 / 255.0],
                params,
            )
        })
        .collect();
    Ok(DepthFrame {
        width: w,
        height: h,
        data,
    })
}

/// Halves both dimensions by taking the minimum nonzero depth of each 2x2
/// block; a block without readings stays a hole. Odd trailing rows/columns
/// are dropped.
pub fn downscale_min2x2(frame: &DepthFrame) -> DepthFrame {
    let (w, h) = (frame.width / 2, frame.height / 2);
    let mut data = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let block = [
                frame.get(2 * u, 2 * v),
                frame.get(2 * u + 1, 2 * v),
                frame.get(2 * u, 2 * v + 1),
                frame.get(2 * u + 1, 2 * v + 1),
            ];
            data.push(block.into_iter().filter(|&d| d != 0).min().unwrap_or(0));
        }
    }
    DepthFrame {
        width: w,
        height: h,
        data,
    }
}
