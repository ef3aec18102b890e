#![allow(dead_code)]

//! Deterministic inputs whose encodings are pinned under tests/fixtures.
//! Set DEPTHGRID_BLESS=1 to rewrite the fixture files.

use std::path::PathBuf;

use depthgrid::app::{encode_recording, RecordedFrame, RecordedJoint, RecordedSkeleton, Recording, RecordingHeader};
use depthgrid::codec::{lossy_decode, lossy_encode, CodecQuality, Plane};
use depthgrid::geometry::CalibrationSet;
use depthgrid::model::{
    joint_set, ColorFrame, DepthFrame, InputSkeleton, JointKind, LabelFrame, RigidTransform, Vec3, JOINT_COUNT,
};
use depthgrid::net::{encode_packet, FrameEncoder, SensorFrame, StreamCodecConfig};

pub const BLESS_ENV: &str = "DEPTHGRID_BLESS";

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn sensor_frame(seq: u32) -> SensorFrame {
    let (w, h) = (20, 15);
    let depth = (0..w * h)
        .map(|i| {
            let (u, v) = (i % w, i / w);
            if (u + v) % 11 == 0 {
                0
            } else {
                1200 + (u * 37 + v * 53) as u16 + 3 * seq as u16
            }
        })
        .collect();
    let color = (0..w * h).map(|i| [(i * 7 % 256) as u8, (i * 13 % 256) as u8, (100 + seq as usize * 5) as u8]).collect();
    let labels = (0..w * h).map(|i| if (6..14).contains(&(i % w)) { 1 + (i / w >= 8) as u8 } else { 0 }).collect();
    let mut pos = [Vec3::zeros(); JOINT_COUNT];
    for (i, p) in pos.iter_mut().enumerate() {
        *p = Vec3::new(0.05 * i as f64 - 0.3, 0.9 - 0.1 * i as f64, 2.5 + 0.01 * seq as f64);
    }
    SensorFrame {
        camera_id: 3,
        seq,
        timestamp_us: 1_000_000 + seq as u64 * 33_333,
        depth: Some(DepthFrame::new(w, h, depth).unwrap()),
        color: Some(ColorFrame::new(w, h, color).unwrap()),
        labels: Some(LabelFrame::new(w, h, labels).unwrap()),
        skeletons: Some(vec![InputSkeleton {
            camera_id: 3,
            local_user_id: 2,
            joints: joint_set(&pos, 0.75),
        }]),
    }
}

pub fn lossy_planes() -> (Plane, Plane) {
    let (w, h) = (24, 10);
    let key = Plane::new(w, h, (0..w * h).map(|i| ((i % w) * 9 + (i / w) * 4) as u8).collect()).unwrap();
    let mut next = key.clone();
    for (i, v) in next.data.iter_mut().enumerate() {
        if (30..80).contains(&i) {
            *v = v.wrapping_add(17);
        }
    }
    (key, next)
}

pub fn recording() -> Recording {
    let joints = |offset: f32| {
        JointKind::ALL
            .iter()
            .map(|&kind| RecordedJoint {
                kind,
                position: [offset + 0.125 * kind as u8 as f32, -1.5 + 0.25 * kind as u8 as f32, 0.1 * kind as u8 as f32],
                confidence: if kind.is_leg() { 0.25 } else { 0.9 },
            })
            .collect()
    };
    Recording {
        header: RecordingHeader::new(30, 1_760_000_000_000_000),
        frames: vec![
            RecordedFrame { frame_index: 0, skeletons: vec![] },
            RecordedFrame {
                frame_index: 1,
                skeletons: vec![RecordedSkeleton { output_id: 1, label: "P1".into(), joints: joints(0.0) }],
            },
            RecordedFrame {
                frame_index: 4,
                skeletons: vec![
                    RecordedSkeleton { output_id: 1, label: "alice".into(), joints: joints(0.5) },
                    RecordedSkeleton { output_id: 7, label: "Zoë".into(), joints: joints(-2.0) },
                ],
            },
        ],
    }
}

pub fn calibration() -> CalibrationSet {
    let mut set = CalibrationSet::new(0);
    set.insert(1, RigidTransform::from_axis_angle(Vec3::z(), std::f64::consts::PI, Vec3::new(1.670166, 3.5, 0.0)));
    set.insert(2, RigidTransform::new(nalgebra::Matrix3::identity(), Vec3::new(3.340332, 0.0, 0.0)));
    set
}

/// Every pinned artifact by fixture file name.
pub fn golden_cases() -> Vec<(&'static str, Vec<u8>)> {
    let mut enc = FrameEncoder::new(StreamCodecConfig::default());
    let key = encode_packet(&enc.encode(&sensor_frame(0)).unwrap()).unwrap();
    let predicted = encode_packet(&enc.encode(&sensor_frame(1)).unwrap()).unwrap();
    let raw = encode_packet(&FrameEncoder::new(StreamCodecConfig::raw()).encode(&sensor_frame(0)).unwrap()).unwrap();
    let (a, b) = lossy_planes();
    let q = CodecQuality::new(2).unwrap();
    let key_stream = lossy_encode(&a, None, q).unwrap();
    // Prediction references what the decoder reconstructs.
    let key_seen = lossy_decode(&key_stream, None).unwrap();
    vec![
        ("packet_keyframe.bin", key),
        ("packet_predicted.bin", predicted),
        ("packet_raw.bin", raw),
        ("lossy_predicted.bin", lossy_encode(&b, Some(&key_seen), q).unwrap()),
        ("lossy_keyframe.bin", key_stream),
        ("recording.sk3d", encode_recording(&recording()).unwrap()),
        ("calibration.txt", calibration().to_text().into_bytes()),
    ]
}

/// Compares each artifact with its fixture; with the bless variable set,
/// rewrites the fixtures instead. Returns the names that differ.
pub fn check_fixtures() -> Vec<String> {
    let bless = std::env::var_os(BLESS_ENV).is_some();
    let mut bad = Vec::new();
    for (name, bytes) in golden_cases() {
        let path = fixture_path(name);
        if bless {
            std::fs::write(&path, &bytes).unwrap();
            continue;
        }
        match std::fs::read(&path) {
            Ok(pinned) if pinned == bytes => {}
            _ => bad.push(name.to_string()),
        }
    }
    bad
}
