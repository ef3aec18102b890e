use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{JointKind, OutputSkeleton, JOINT_COUNT};

pub const RECORDING_MAGIC: [u8; 4] = *b"SK3D";
pub const RECORDING_VERSION: u8 = 1;
pub const RECORDING_HEADER_LEN: usize = 4 + 1 + 2 + 8;
/// kind u8 followed by x, y, z and confidence as f32.
pub const RECORDED_JOINT_LEN: usize = 1 + 4 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub version: u8,
    pub fps: u16,
    pub start_timestamp_us: u64,
}

impl RecordingHeader {
    pub fn new(fps: u16, start_timestamp_us: u64) -> Self {
        RecordingHeader {
            version: RECORDING_VERSION,
            fps,
            start_timestamp_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordedJoint {
    pub kind: JointKind,
    pub position: [f32; 3],
    pub confidence: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedSkeleton {
    pub output_id: u32,
    pub label: String,
    pub joints: Vec<RecordedJoint>,
}

impl RecordedSkeleton {
    pub fn from_output(o: &OutputSkeleton) -> Self {
        RecordedSkeleton {
            output_id: o.output_id,
            label: o.label.clone(),
            joints: o
                .joints
                .iter()
                .map(|j| RecordedJoint {
                    kind: j.kind,
                    position: [j.position.x as f32, j.position.y as f32, j.position.z as f32],
                    confidence: j.confidence as f32,
                })
                .collect(),
        }
    }

    /// Bytes this skeleton occupies inside a frame record.
    pub fn encoded_len(&self) -> usize {
        4 + 1 + self.label.len() + JOINT_COUNT * RECORDED_JOINT_LEN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedFrame {
    pub frame_index: u32,
    pub skeletons: Vec<RecordedSkeleton>,
}

impl RecordedFrame {
    pub fn encoded_len(&self) -> usize {
        4 + 1 + self.skeletons.iter().map(RecordedSkeleton::encoded_len).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub header: RecordingHeader,
    pub frames: Vec<RecordedFrame>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordingErrorKind {
    BadMagic,
    UnsupportedVersion(u8),
    Truncated,
    FrameOrder { previous: u32 },
    BadJoint(String),
    BadLabel,
}

/// A rejected recording: what went wrong, where, and in which frame record
/// (counted from zero; `None` for header errors).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", describe(.kind, *.offset, *.frame, *.frame_index))]
pub struct RecordingError {
    pub kind: RecordingErrorKind,
    pub offset: usize,
    pub frame: Option<usize>,
    pub frame_index: Option<u32>,
}

fn describe(kind: &RecordingErrorKind, offset: usize, frame: Option<usize>, frame_index: Option<u32>) -> String {
    let what = match kind {
        RecordingErrorKind::BadMagic => "bad magic".to_string(),
        RecordingErrorKind::UnsupportedVersion(v) => format!("unsupported version {v}"),
        RecordingErrorKind::Truncated => "truncated".to_string(),
        RecordingErrorKind::FrameOrder { previous } => format!("frame index not above previous {previous}"),
        RecordingErrorKind::BadJoint(m) => format!("bad joint: {m}"),
        RecordingErrorKind::BadLabel => "label is not UTF-8".to_string(),
    };
    let mut s = format!("recording {what} at byte {offset}");
    if let Some(n) = frame {
        s.push_str(&format!(" in frame record {n}"));
    }
    if let Some(i) = frame_index {
        s.push_str(&format!(" (frame_index {i})"));
    }
    s
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("frame index {got} not above previous {previous}")]
    FrameOrder { previous: u32, got: u32 },
    #[error("{0} skeletons in one frame, at most 255")]
    TooManySkeletons(usize),
    #[error("label of output {0} longer than 255 bytes")]
    LabelTooLong(u32),
    #[error("output {0} has {1} joints, expected 15 in canonical order")]
    BadJoints(u32, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode_header(h: &RecordingHeader) -> [u8; RECORDING_HEADER_LEN] {
    let mut out = [0u8; RECORDING_HEADER_LEN];
    out[..4].copy_from_slice(&RECORDING_MAGIC);
    out[4] = h.version;
    out[5..7].copy_from_slice(&h.fps.to_le_bytes());
    out[7..].copy_from_slice(&h.start_timestamp_us.to_le_bytes());
    out
}

pub fn encode_frame(frame: &RecordedFrame, out: &mut Vec<u8>) -> Result<(), RecordError> {
    if frame.skeletons.len() > u8::MAX as usize {
        return Err(RecordError::TooManySkeletons(frame.skeletons.len()));
    }
    for s in &frame.skeletons {
        if s.label.len() > u8::MAX as usize {
            return Err(RecordError::LabelTooLong(s.output_id));
        }
        let canonical = s.joints.len() == JOINT_COUNT && s.joints.iter().enumerate().all(|(i, j)| j.kind.index() == i);
        if !canonical {
            return Err(RecordError::BadJoints(s.output_id, s.joints.len()));
        }
    }
    out.extend_from_slice(&frame.frame_index.to_le_bytes());
    out.push(frame.skeletons.len() as u8);
    for s in &frame.skeletons {
        out.extend_from_slice(&s.output_id.to_le_bytes());
        out.push(s.label.len() as u8);
        out.extend_from_slice(s.label.as_bytes());
        for j in &s.joints {
            out.push(j.kind as u8);
            for v in j.position.iter().chain(std::iter::once(&j.confidence)) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(())
}

/// Streams frame records behind a header, enforcing increasing frame
/// indices.
pub struct RecordingWriter<W: Write> {
    inner: W,
    last: Option<u32>,
    buf: Vec<u8>,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut inner: W, header: &RecordingHeader) -> std::io::Result<Self> {
        inner.write_all(&encode_header(header))?;
        Ok(RecordingWriter {
            inner,
            last: None,
            buf: Vec::new(),
        })
    }

    pub fn write_frame(&mut self, frame: &RecordedFrame) -> Result<(), RecordError> {
        if let Some(previous) = self.last.filter(|&p| frame.frame_index <= p) {
            return Err(RecordError::FrameOrder {
                previous,
                got: frame.frame_index,
            });
        }
        self.buf.clear();
        encode_frame(frame, &mut self.buf)?;
        self.inner.write_all(&self.buf)?;
        self.last = Some(frame.frame_index);
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>, RecordError> {
    let mut w = RecordingWriter::new(Vec::new(), &rec.header)?;
    for f in &rec.frames {
        w.write_frame(f)?;
    }
    Ok(w.into_inner())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    frame: Option<usize>,
    frame_index: Option<u32>,
}

impl<'a> Reader<'a> {
    fn fail(&self, kind: RecordingErrorKind, offset: usize) -> RecordingError {
        RecordingError {
            kind,
            offset,
            frame: self.frame,
            frame_index: self.frame_index,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], RecordingError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(self.fail(RecordingErrorKind::Truncated, self.bytes.len()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, RecordingError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, RecordingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, RecordingError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording, RecordingError> {
    let mut r = Reader {
        bytes,
        pos: 0,
        frame: None,
        frame_index: None,
    };
    if r.take(4)? != RECORDING_MAGIC {
        return Err(r.fail(RecordingErrorKind::BadMagic, 0));
    }
    let version = r.u8()?;
    if version != RECORDING_VERSION {
        return Err(r.fail(RecordingErrorKind::UnsupportedVersion(version), 4));
    }
    let fps = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    let start = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let header = RecordingHeader {
        version,
        fps,
        start_timestamp_us: start,
    };
    let mut frames: Vec<RecordedFrame> = Vec::new();
    while r.pos < bytes.len() {
        r.frame = Some(frames.len());
        r.frame_index = None;
        let at = r.pos;
        let frame_index = r.u32()?;
        r.frame_index = Some(frame_index);
        if let Some(previous) = frames.last().map(|f| f.frame_index).filter(|&p| frame_index <= p) {
            return Err(r.fail(RecordingErrorKind::FrameOrder { previous }, at));
        }
        let count = r.u8()?;
        let mut skeletons = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let output_id = r.u32()?;
            let len = r.u8()? as usize;
            let label_at = r.pos;
            let label = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.fail(RecordingErrorKind::BadLabel, label_at))?
                .to_string();
            let mut joints = Vec::with_capacity(JOINT_COUNT);
            for i in 0..JOINT_COUNT {
                let joint_at = r.pos;
                let kind = r.u8()?;
                if kind as usize != i {
                    return Err(r.fail(
                        RecordingErrorKind::BadJoint(format!("kind {kind} in slot {i}")),
                        joint_at,
                    ));
                }
                let position = [r.f32()?, r.f32()?, r.f32()?];
                let confidence = r.f32()?;
                if position.iter().any(|v| !v.is_finite()) || !(0.0..=1.0).contains(&confidence) {
                    return Err(r.fail(
                        RecordingErrorKind::BadJoint(format!("slot {i} out of range")),
                        joint_at,
                    ));
                }
                joints.push(RecordedJoint {
                    kind: JointKind::ALL[i],
                    position,
                    confidence,
                });
            }
            skeletons.push(RecordedSkeleton {
                output_id,
                label,
                joints,
            });
        }
        frames.push(RecordedFrame {
            frame_index,
            skeletons,
        });
    }
    Ok(Recording { header, frames })
}
