use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::shapes::Solid;
use crate::model::{
    CameraIntrinsics, InputSkeleton, Joint, JointKind, JointSet, RigidTransform, Vec3, JOINT_COUNT,
};

/// Standard deviation of joint position noise, meters.
pub const JOINT_NOISE_M: f64 = 0.01;
/// A blocker must sit at least this far in front of a joint.
const BLOCK_MARGIN_M: f64 = 0.02;

/// Mixes several values into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        // splitmix64 finalizer
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// True when a solid not owned by `owner` lies between `from` and `to`.
pub fn line_blocked(from: &Vec3, to: &Vec3, owner: u8, solids: &[&Solid]) -> bool {
    let delta = to - from;
    let dist = delta.norm();
    if dist <= BLOCK_MARGIN_M {
        return false;
    }
    let dir = delta / dist;
    solids.iter().any(|s| {
        s.owner != Some(owner)
            && s.intersect(from, &dir).is_some_and(|t| t < dist - BLOCK_MARGIN_M)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Track {
    first_seen: u64,
    local_id: Option<u8>,
}

/// One person visible to the rig at a given instant.
#[derive(Debug, Clone)]
pub struct Visible<'a> {
    pub human_id: u8,
    pub joints: &'a [Vec3; JOINT_COUNT],
}

/// Per-rig skeleton tracker with detection latency and recycled local ids.
#[derive(Debug, Clone)]
pub struct SkeletonDetector {
    camera_id: u16,
    latency: u32,
    tracks: BTreeMap<u8, Track>,
}

impl SkeletonDetector {
    pub fn new(camera_id: u16, latency: u32) -> Self {
        SkeletonDetector {
            camera_id,
            latency,
            tracks: BTreeMap::new(),
        }
    }

    /// Drops every track, as when the lens is covered.
    pub fn clear(&mut self) {
        self.tracks.clear();
    }

    /// Local id currently assigned to a human, if emitted.
    pub fn local_id_of(&self, human_id: u8) -> Option<u8> {
        self.tracks.get(&human_id).and_then(|t| t.local_id)
    }

    /// Advances to `frame` and returns the skeletons emitted there, sorted by
    /// local id. `humans` holds world-frame joints of everyone present;
    /// `solids` everything that can block a line of sight.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        pose: &RigidTransform,
        intr: &CameraIntrinsics,
        frame: u64,
        seed: u64,
        humans: &[Visible<'_>],
        solids: &[&Solid],
    ) -> Vec<InputSkeleton> {
        let to_camera = pose.inverse();
        let in_view: Vec<&Visible> = humans
            .iter()
            .filter(|h| intr.sees(&to_camera.apply(&h.joints[JointKind::Torso.index()])))
            .collect();
        self.tracks
            .retain(|id, _| in_view.iter().any(|h| h.human_id == *id));
        let mut out = Vec::new();
        for h in in_view {
            let track = self.tracks.entry(h.human_id).or_insert(Track {
                first_seen: frame,
                local_id: None,
            });
            if frame < track.first_seen + self.latency as u64 {
                continue;
            }
            if track.local_id.is_none() {
                let taken: Vec<u8> = self.tracks.values().filter_map(|t| t.local_id).collect();
                let free = (1..=15u8).find(|id| !taken.contains(id));
                match free {
                    Some(id) => self.tracks.get_mut(&h.human_id).unwrap().local_id = Some(id),
                    None => continue,
                }
            }
            let local = self.tracks[&h.human_id].local_id.unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                seed,
                self.camera_id as u64,
                frame,
                h.human_id as u64,
            ]));
            out.push(InputSkeleton {
                camera_id: self.camera_id,
                local_user_id: local,
                joints: noisy_joints(pose, &to_camera, intr, h, solids, &mut rng),
            });
        }
        out.sort_by_key(|s| s.local_user_id);
        out
    }
}

fn noisy_joints(
    pose: &RigidTransform,
    to_camera: &RigidTransform,
    intr: &CameraIntrinsics,
    h: &Visible<'_>,
    solids: &[&Solid],
    rng: &mut ChaCha8Rng,
) -> JointSet {
    let noise = Normal::new(0.0, JOINT_NOISE_M).expect("valid sigma");
    std::array::from_fn(|i| {
        let world = h.joints[i];
        let cam = to_camera.apply(&world);
        let clear = intr.sees(&cam) && !line_blocked(&pose.translation, &world, h.human_id, solids);
        let confidence = if clear {
            rng.gen_range(0.85..=1.0)
        } else {
            rng.gen_range(0.0..0.5)
        };
        let jitter = Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
        Joint::new(JointKind::ALL[i], cam + jitter, confidence)
    })
}
