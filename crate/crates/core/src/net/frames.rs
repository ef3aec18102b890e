use std::sync::Arc;

use super::packet::{Section, SectionCodec, SectionKind, SensorPacket};
use super::skeletons::{decode_skeletons, encode_skeletons};
use super::NetError;
use crate::codec::{
    decode_labels, encode_labels, lossy_decode_prefix, lossy_encode_into, pack_depth,
    stream_is_predicted, unpack_depth, CodecQuality, DepthPackingParams, PackedDepthFrame, Plane,
};
use crate::model::{ColorFrame, DepthFrame, InputSkeleton, LabelFrame};

/// Everything one camera produced for one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorFrame {
    pub camera_id: u16,
    pub seq: u32,
    pub timestamp_us: u64,
    pub depth: Option<DepthFrame>,
    pub color: Option<ColorFrame>,
    pub labels: Option<LabelFrame>,
    pub skeletons: Option<Vec<InputSkeleton>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneCoding {
    Raw,
    Lossy(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthCoding {
    Raw,
    /// Three-channel packing; the coarse channel is always sent losslessly.
    Packed { fine_deadzone: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamCodecConfig {
    pub depth: DepthCoding,
    pub color: PlaneCoding,
    pub labels: PlaneCoding,
    pub packing: DepthPackingParams,
    /// Every this many frames an unpredicted frame is sent; the frames in
    /// between predict from it.
    pub keyframe_interval: u32,
}

impl Default for StreamCodecConfig {
    fn default() -> Self {
        StreamCodecConfig {
            depth: DepthCoding::Packed { fine_deadzone: 1 },
            color: PlaneCoding::Lossy(4),
            labels: PlaneCoding::Lossy(4),
            packing: DepthPackingParams::default(),
            keyframe_interval: 30,
        }
    }
}

impl StreamCodecConfig {
    /// Uncompressed depth, color and labels, as used for calibration clouds.
    pub fn raw() -> Self {
        StreamCodecConfig {
            depth: DepthCoding::Raw,
            color: PlaneCoding::Raw,
            labels: PlaneCoding::Raw,
            ..Self::default()
        }
    }
}

/// Decoded planes of a keyframe, the prediction source for later frames.
#[derive(Debug, Clone, Default)]
struct Reference {
    depth: Option<[Plane; 3]>,
    color: Option<[Plane; 3]>,
    labels: Option<Plane>,
}

fn dims(w: usize, h: usize) -> Result<(u16, u16), NetError> {
    match (u16::try_from(w), u16::try_from(h)) {
        (Ok(w), Ok(h)) => Ok((w, h)),
        _ => Err(NetError::Payload(format!("frame {w}x{h} too large for the wire"))),
    }
}

fn encode_planes(
    planes: &[&Plane],
    refs: Option<&[Plane]>,
    qualities: &[CodecQuality],
) -> Result<Vec<u8>, NetError> {
    let mut out = Vec::new();
    for (i, p) in planes.iter().enumerate() {
        let r = refs.map(|r| &r[i]).filter(|r| r.same_shape(p));
        lossy_encode_into(p, r, qualities[i], &mut out)?;
    }
    Ok(out)
}

fn decode_planes<const N: usize>(
    payload: &[u8],
    refs: Option<&[Plane; N]>,
    w: u16,
    h: u16,
) -> Result<[Plane; N], NetError> {
    let mut pos = 0;
    let mut out = Vec::with_capacity(N);
    for i in 0..N {
        let rest = &payload[pos..];
        if stream_is_predicted(rest) == Some(true) && refs.is_none() {
            return Err(NetError::MissingKeyframe);
        }
        let (plane, used) = lossy_decode_prefix(rest, refs.map(|r| &r[i]))?;
        if plane.width != w as usize || plane.height != h as usize {
            return Err(NetError::Payload(format!(
                "stream {}x{} inside a {w}x{h} section",
                plane.width, plane.height
            )));
        }
        pos += used;
        out.push(plane);
    }
    if pos != payload.len() {
        return Err(NetError::Payload(format!(
            "{} trailing bytes after plane streams",
            payload.len() - pos
        )));
    }
    Ok(out.try_into().expect("N planes"))
}

fn split_color(c: &ColorFrame) -> [Plane; 3] {
    std::array::from_fn(|ch| Plane {
        width: c.width,
        height: c.height,
        data: c.data.iter().map(|px| px[ch]).collect(),
    })
}

fn join_color(p: &[Plane; 3]) -> ColorFrame {
    ColorFrame {
        width: p[0].width,
        height: p[0].height,
        data: (0..p[0].data.len())
            .map(|i| [p[0].data[i], p[1].data[i], p[2].data[i]])
            .collect(),
    }
}

fn packed_planes(packed: PackedDepthFrame) -> [Plane; 3] {
    [packed.coarse, packed.fine_a, packed.fine_b]
}

fn unpack_holes(planes: &[Plane; 3], params: &DepthPackingParams) -> Result<DepthFrame, NetError> {
    let packed = PackedDepthFrame {
        coarse: planes[0].clone(),
        fine_a: planes[1].clone(),
        fine_b: planes[2].clone(),
    };
    let mut depth = unpack_depth(&packed, params)?;
    // A zero coarse value only occurs below 129 mm, far inside the minimum
    // range, so it marks a hole whose fine channels picked up codec noise.
    for (d, &l) in depth.data.iter_mut().zip(&planes[0].data) {
        if l == 0 {
            *d = 0;
        }
    }
    Ok(depth)
}

/// True when no stream in the packet predicts from an earlier frame.
pub fn is_keyframe(packet: &SensorPacket) -> bool {
    !packet.sections.iter().any(|s| {
        s.codec != SectionCodec::Raw && stream_is_predicted(&s.payload) == Some(true)
    })
}

/// Per-camera stateful encoder producing keyframes and predicted frames.
#[derive(Debug, Clone)]
pub struct FrameEncoder {
    config: StreamCodecConfig,
    reference: Option<Reference>,
    since_keyframe: u32,
}

struct Encoded {
    section: Section,
    recon: ReconPart,
}

enum ReconPart {
    None,
    Depth([Plane; 3]),
    Color([Plane; 3]),
    Labels(Plane),
}

impl FrameEncoder {
    pub fn new(config: StreamCodecConfig) -> Self {
        FrameEncoder {
            config,
            reference: None,
            since_keyframe: 0,
        }
    }

    pub fn config(&self) -> &StreamCodecConfig {
        &self.config
    }

    /// Forces the next frame to be a keyframe.
    pub fn reset(&mut self) {
        self.reference = None;
    }

    pub fn encode(&mut self, frame: &SensorFrame) -> Result<SensorPacket, NetError> {
        let interval = self.config.keyframe_interval.max(1);
        let intra = self.reference.is_none() || self.since_keyframe >= interval;
        let reference = if intra { None } else { self.reference.as_ref() };
        let cfg = self.config;

        let (depth, color, labels) = std::thread::scope(|s| {
            let depth = frame
                .depth
                .as_ref()
                .map(|d| s.spawn(move || encode_depth(d, reference.and_then(|r| r.depth.as_ref()), &cfg)));
            let color = frame
                .color
                .as_ref()
                .map(|c| s.spawn(move || encode_color(c, reference.and_then(|r| r.color.as_ref()), &cfg)));
            let labels = frame
                .labels
                .as_ref()
                .map(|l| encode_label_section(l, reference.and_then(|r| r.labels.as_ref()), &cfg));
            let join = |h: Option<std::thread::ScopedJoinHandle<'_, Result<Encoded, NetError>>>| {
                h.map(|h| h.join().expect("encoder thread panicked")).transpose()
            };
            (join(depth), join(color), labels.transpose())
        });
        let (depth, color, labels) = (depth?, color?, labels?);

        let mut sections = Vec::with_capacity(4);
        let mut recon = Reference::default();
        for part in [color, depth, labels].into_iter().flatten() {
            match part.recon {
                ReconPart::Depth(p) => recon.depth = Some(p),
                ReconPart::Color(p) => recon.color = Some(p),
                ReconPart::Labels(p) => recon.labels = Some(p),
                ReconPart::None => {}
            }
            sections.push(part.section);
        }
        if let Some(sk) = &frame.skeletons {
            sections.push(Section {
                kind: SectionKind::Skeletons,
                codec: SectionCodec::Raw,
                width: 0,
                height: 0,
                payload: encode_skeletons(sk),
            });
        }
        if intra {
            self.reference = Some(recon);
            self.since_keyframe = 1;
        } else {
            self.since_keyframe += 1;
        }
        Ok(SensorPacket {
            camera_id: frame.camera_id,
            seq: frame.seq,
            timestamp_us: frame.timestamp_us,
            sections,
        })
    }
}

fn encode_depth(
    d: &DepthFrame,
    refs: Option<&[Plane; 3]>,
    cfg: &StreamCodecConfig,
) -> Result<Encoded, NetError> {
    let (w, h) = dims(d.width, d.height)?;
    match cfg.depth {
        DepthCoding::Raw => Ok(Encoded {
            section: Section {
                kind: SectionKind::Depth,
                codec: SectionCodec::Raw,
                width: w,
                height: h,
                payload: d.data.iter().flat_map(|v| v.to_le_bytes()).collect(),
            },
            recon: ReconPart::None,
        }),
        DepthCoding::Packed { fine_deadzone } => {
            let planes = packed_planes(pack_depth(d, &cfg.packing)?);
            let fine = CodecQuality::new(fine_deadzone)?;
            let q = [CodecQuality::LOSSLESS, fine, fine];
            let payload = encode_planes(&[&planes[0], &planes[1], &planes[2]], refs.map(|r| &r[..]), &q)?;
            let recon = decode_planes::<3>(&payload, refs, w, h)?;
            Ok(Encoded {
                section: Section {
                    kind: SectionKind::Depth,
                    codec: SectionCodec::Depth3cQDelta,
                    width: w,
                    height: h,
                    payload,
                },
                recon: ReconPart::Depth(recon),
            })
        }
    }
}

fn encode_color(
    c: &ColorFrame,
    refs: Option<&[Plane; 3]>,
    cfg: &StreamCodecConfig,
) -> Result<Encoded, NetError> {
    let (w, h) = dims(c.width, c.height)?;
    match cfg.color {
        PlaneCoding::Raw => Ok(Encoded {
            section: Section {
                kind: SectionKind::Rgb,
                codec: SectionCodec::Raw,
                width: w,
                height: h,
                payload: c.data.iter().flatten().copied().collect(),
            },
            recon: ReconPart::None,
        }),
        PlaneCoding::Lossy(dz) => {
            let planes = split_color(c);
            let q = [CodecQuality::new(dz)?; 3];
            let payload = encode_planes(&[&planes[0], &planes[1], &planes[2]], refs.map(|r| &r[..]), &q)?;
            let recon = decode_planes::<3>(&payload, refs, w, h)?;
            Ok(Encoded {
                section: Section {
                    kind: SectionKind::Rgb,
                    codec: SectionCodec::QDelta,
                    width: w,
                    height: h,
                    payload,
                },
                recon: ReconPart::Color(recon),
            })
        }
    }
}

fn encode_label_section(
    l: &LabelFrame,
    refs: Option<&Plane>,
    cfg: &StreamCodecConfig,
) -> Result<Encoded, NetError> {
    let (w, h) = dims(l.width, l.height)?;
    match cfg.labels {
        PlaneCoding::Raw => Ok(Encoded {
            section: Section {
                kind: SectionKind::Labels,
                codec: SectionCodec::Raw,
                width: w,
                height: h,
                payload: l.data.clone(),
            },
            recon: ReconPart::None,
        }),
        PlaneCoding::Lossy(dz) => {
            let luma = encode_labels(l)?;
            let refs1 = refs.map(|r| std::slice::from_ref(r));
            let payload = encode_planes(&[&luma], refs1, &[CodecQuality::new(dz)?])?;
            let [recon] = decode_planes::<1>(&payload, refs.map(std::array::from_ref), w, h)?;
            Ok(Encoded {
                section: Section {
                    kind: SectionKind::Labels,
                    codec: SectionCodec::QDelta,
                    width: w,
                    height: h,
                    payload,
                },
                recon: ReconPart::Labels(recon),
            })
        }
    }
}

/// Per-camera decoder. Holds the decoded keyframe that predicted frames
/// refer to.
#[derive(Debug, Clone, Default)]
pub struct FrameDecoder {
    packing: DepthPackingParams,
    keyframe: Option<(u32, Arc<Reference>)>,
}

impl FrameDecoder {
    pub fn new(packing: DepthPackingParams) -> Self {
        FrameDecoder {
            packing,
            keyframe: None,
        }
    }

    pub fn forget_keyframe(&mut self) {
        self.keyframe = None;
    }

    /// Decodes packets arriving in stream order.
    pub fn decode(&mut self, packet: &SensorPacket) -> Result<SensorFrame, NetError> {
        if is_keyframe(packet) {
            let (frame, recon) = decode_with(packet, None, &self.packing)?;
            self.keyframe = Some((packet.seq, Arc::new(recon)));
            Ok(frame)
        } else {
            let r = self.keyframe.as_ref().ok_or(NetError::MissingKeyframe)?.1.clone();
            Ok(decode_with(packet, Some(&r), &self.packing)?.0)
        }
    }

    /// Decodes `packet`, first bringing the cached keyframe up to date with
    /// `keyframe` when the packet is predicted.
    pub fn decode_with_keyframe(
        &mut self,
        packet: &SensorPacket,
        keyframe: Option<&SensorPacket>,
    ) -> Result<SensorFrame, NetError> {
        if !is_keyframe(packet) {
            let kf = keyframe.ok_or(NetError::MissingKeyframe)?;
            if self.keyframe.as_ref().map(|k| k.0) != Some(kf.seq) {
                self.keyframe = None;
                self.decode(kf)?;
            }
        }
        self.decode(packet)
    }
}

fn decode_with(
    packet: &SensorPacket,
    reference: Option<&Reference>,
    packing: &DepthPackingParams,
) -> Result<(SensorFrame, Reference), NetError> {
    let mut frame = SensorFrame {
        camera_id: packet.camera_id,
        seq: packet.seq,
        timestamp_us: packet.timestamp_us,
        ..Default::default()
    };
    let mut recon = Reference::default();
    for s in &packet.sections {
        let (w, h) = (s.width as usize, s.height as usize);
        let n = w * h;
        match (s.kind, s.codec) {
            (SectionKind::Depth, SectionCodec::Raw) => {
                if s.payload.len() != 2 * n {
                    return Err(NetError::Payload(format!("raw depth of {} bytes for {w}x{h}", s.payload.len())));
                }
                let data = s.payload.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
                frame.depth = Some(DepthFrame { width: w, height: h, data });
            }
            (SectionKind::Depth, SectionCodec::Depth3cQDelta) => {
                let planes = decode_planes::<3>(&s.payload, reference.and_then(|r| r.depth.as_ref()), s.width, s.height)?;
                frame.depth = Some(unpack_holes(&planes, packing)?);
                recon.depth = Some(planes);
            }
            (SectionKind::Rgb, SectionCodec::Raw) => {
                if s.payload.len() != 3 * n {
                    return Err(NetError::Payload(format!("raw color of {} bytes for {w}x{h}", s.payload.len())));
                }
                let data = s.payload.chunks_exact(3).map(|b| [b[0], b[1], b[2]]).collect();
                frame.color = Some(ColorFrame { width: w, height: h, data });
            }
            (SectionKind::Rgb, SectionCodec::QDelta) => {
                let planes = decode_planes::<3>(&s.payload, reference.and_then(|r| r.color.as_ref()), s.width, s.height)?;
                frame.color = Some(join_color(&planes));
                recon.color = Some(planes);
            }
            (SectionKind::Labels, SectionCodec::Raw) => {
                if s.payload.len() != n || s.payload.iter().any(|&v| v > 15) {
                    return Err(NetError::Payload("raw labels malformed".into()));
                }
                frame.labels = Some(LabelFrame { width: w, height: h, data: s.payload.clone() });
            }
            (SectionKind::Labels, SectionCodec::QDelta) => {
                let refs = reference.and_then(|r| r.labels.as_ref()).map(std::array::from_ref);
                let [plane] = decode_planes::<1>(&s.payload, refs.cloned().as_ref(), s.width, s.height)?;
                frame.labels = Some(decode_labels(&plane));
                recon.labels = Some(plane);
            }
            (SectionKind::Skeletons, _) => {
                frame.skeletons = Some(decode_skeletons(&s.payload, packet.camera_id)?);
            }
            (kind, codec) => {
                return Err(NetError::Payload(format!("{codec:?} not valid for {kind:?}")));
            }
        }
    }
    Ok((frame, recon))
}
