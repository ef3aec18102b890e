use std::collections::BTreeMap;

use serde::Serialize;

use super::recording::{RecordedFrame, Recording, RecordingHeader};
use super::AppError;

#[derive(Serialize, serde::Deserialize)]
struct HeaderLine {
    magic: String,
    #[serde(flatten)]
    header: RecordingHeader,
    frames: usize,
}

/// The recording as JSON lines: a header line, then one line per frame.
/// Every number is printed so that parsing it back gives the same f32.
pub fn replay_lines(rec: &Recording) -> impl Iterator<Item = String> + '_ {
    let head = serde_json::to_string(&HeaderLine {
        magic: "SK3D".into(),
        header: rec.header,
        frames: rec.frames.len(),
    })
    .expect("header serializes");
    std::iter::once(head).chain(rec.frames.iter().map(|f| serde_json::to_string(f).expect("frame serializes")))
}

/// Inverse of [`replay_lines`].
pub fn parse_replay_text(text: &str) -> Result<Recording, AppError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| AppError::Input("empty replay text".into()))?;
    let head: HeaderLine = serde_json::from_str(head).map_err(|e| AppError::Input(format!("replay line 1: {e}")))?;
    if head.magic != "SK3D" {
        return Err(AppError::Input(format!("replay line 1: magic {:?}", head.magic)));
    }
    let frames = lines
        .map(|(n, l)| serde_json::from_str::<RecordedFrame>(l).map_err(|e| AppError::Input(format!("replay line {}: {e}", n + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    if frames.len() != head.frames {
        return Err(AppError::Input(format!("header announces {} frames, found {}", head.frames, frames.len())));
    }
    Ok(Recording {
        header: head.header,
        frames,
    })
}

/// Per-output digest of a recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSummary {
    pub output_id: u32,
    pub labels: Vec<String>,
    pub first_frame: u32,
    pub last_frame: u32,
    pub frames: usize,
    /// Distance walked by the torso (m).
    pub path_length: f64,
}

pub fn summarize(rec: &Recording) -> Vec<OutputSummary> {
    let mut out: BTreeMap<u32, (OutputSummary, [f32; 3])> = BTreeMap::new();
    for f in &rec.frames {
        for s in &f.skeletons {
            let torso = s.joints[crate::model::JointKind::Torso.index()].position;
            let e = out.entry(s.output_id).or_insert_with(|| {
                (
                    OutputSummary {
                        output_id: s.output_id,
                        labels: Vec::new(),
                        first_frame: f.frame_index,
                        last_frame: f.frame_index,
                        frames: 0,
                        path_length: 0.0,
                    },
                    torso,
                )
            });
            if e.0.labels.last() != Some(&s.label) {
                e.0.labels.push(s.label.clone());
            }
            e.0.last_frame = f.frame_index;
            e.0.frames += 1;
            e.0.path_length += (0..3).map(|i| ((torso[i] - e.1[i]) as f64).powi(2)).sum::<f64>().sqrt();
            e.1 = torso;
        }
    }
    out.into_values().map(|(s, _)| s).collect()
}
