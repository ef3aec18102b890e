use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::detect::mix_seed;
use super::render::RenderedFrame;
use super::scene::InterferenceParams;
use crate::geometry::unproject_pixel;
use crate::model::{CameraIntrinsics, RigidTransform};

/// One active rig's view for interference purposes.
#[derive(Debug, Clone, Copy)]
pub struct RigView<'a> {
    pub camera_id: u16,
    pub pose: &'a RigidTransform,
    pub intrinsics: &'a CameraIntrinsics,
}

/// Punches holes in every frame; `frames[i]` belongs to `rigs[i]`.
/// Returns the number of pixels zeroed per frame.
pub fn apply_interference(
    frames: &mut [RenderedFrame],
    rigs: &[RigView<'_>],
    params: &InterferenceParams,
    seed: u64,
    frame_index: u64,
) -> Vec<usize> {
    assert_eq!(frames.len(), rigs.len(), "one frame per rig");
    frames
        .iter_mut()
        .enumerate()
        .map(|(a, f)| punch_holes(f, a, rigs, params, seed, frame_index))
        .collect()
}

/// Zeroes pixels of `rigs[me]`'s frame whose surface point another rig also
/// sees from a direction differing by more than the threshold angle.
pub fn punch_holes(
    frame: &mut RenderedFrame,
    me: usize,
    rigs: &[RigView<'_>],
    params: &InterferenceParams,
    seed: u64,
    frame_index: u64,
) -> usize {
    if rigs.len() < 2 || params.p_hole <= 0.0 {
        return 0;
    }
    let cos_limit = params.angle_threshold_deg.to_radians().cos();
    let others: Vec<(RigidTransform, &RigView)> = rigs
        .iter()
        .enumerate()
        .filter(|(b, _)| *b != me)
        .map(|(_, r)| (r.pose.inverse(), r))
        .collect();
    let rig = rigs[me];
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, frame_index, rig.camera_id as u64, 0x1f]));
    let (w, h) = (frame.depth.width, frame.depth.height);
    let intr = rig.intrinsics.with_resolution(w, h);
    let mut holes = 0;
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let d = frame.depth.data[i];
            if d == 0 {
                continue;
            }
            let p = rig.pose.apply(&unproject_pixel(&intr, u, v, d));
            let from_me = (p - rig.pose.translation).normalize();
            let contested = others.iter().any(|(inv, other)| {
                other.intrinsics.sees(&inv.apply(&p))
                    && from_me.dot(&(p - other.pose.translation).normalize()) < cos_limit
            });
            if contested && rng.gen_bool(params.p_hole) {
                frame.depth.data[i] = 0;
                frame.labels.data[i] = 0;
                holes += 1;
            }
        }
    }
    holes
}
