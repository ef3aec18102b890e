use std::collections::{BTreeMap, VecDeque};

use depthgrid::geometry::unproject_pixel;
use depthgrid::model::{CameraIntrinsics, JointKind, RigidTransform, Vec3};
use depthgrid::sim::*;
use proptest::prelude::*;

fn scene_path(name: &str) -> String {
    format!("{}/scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn load(name: &str) -> Scene {
    Scene::from_json(&std::fs::read_to_string(scene_path(name)).unwrap()).unwrap()
}

fn odd_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::default().with_resolution(161, 121)
}

fn rig_at(id: u16, position: [f64; 3], yaw: f64, pitch: f64) -> RigSpec {
    RigSpec {
        camera_id: id,
        position,
        yaw_deg: yaw,
        pitch_deg: pitch,
        intrinsics: None,
        cover: vec![],
    }
}

fn bare_scene(rigs: Vec<RigSpec>, room: Vec<Primitive>, humans: Vec<HumanSpec>) -> Scene {
    Scene {
        name: "test".into(),
        seed: 7,
        fps: 30.0,
        duration_s: None,
        intrinsics: odd_intrinsics(),
        interference: InterferenceParams::default(),
        detection_latency: 10,
        room,
        rigs,
        humans,
        side_links: vec![],
    }
}

fn standing(id: u8, pos: [f64; 2], facing: f64) -> HumanSpec {
    HumanSpec {
        id,
        height: 1.75,
        path: PathSpec::Waypoints {
            points: vec![Waypoint { pos, dwell: 0.0 }],
            speed: 0.0,
            facing_deg: Some(facing),
        },
        postures: vec![],
        present: None,
        color: None,
    }
}

fn boxed(center: [f64; 3], size: [f64; 3], yaw: f64) -> Primitive {
    Primitive {
        shape: Shape::Box {
            center,
            size,
            yaw_deg: yaw,
        },
        color: [10, 20, 30],
        owner: None,
    }
}

/// Unsigned distance from a point to a primitive's surface.
fn surface_distance(shape: &Shape, p: &Vec3) -> f64 {
    match shape {
        Shape::Sphere { center, radius } => ((p - Vec3::from(*center)).norm() - radius).abs(),
        Shape::Capsule { a, b, radius } => {
            let (a, b) = (Vec3::from(*a), Vec3::from(*b));
            let t = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            ((p - (a + (b - a) * t)).norm() - radius).abs()
        }
        Shape::Box { center, size, yaw_deg } => {
            let r = p - Vec3::from(*center);
            let (s, c) = yaw_deg.to_radians().sin_cos();
            let local = Vec3::new(c * r.x + s * r.y, -s * r.x + c * r.y, r.z);
            let q = local.abs() - Vec3::from(*size) / 2.0;
            let outside = q.map(|v| v.max(0.0)).norm();
            let inside = q.x.max(q.y).max(q.z).min(0.0);
            (outside + inside).abs()
        }
    }
}

#[test]
fn empty_scene_renders_nothing() {
    let mut sim = Simulator::new(bare_scene(vec![rig_at(0, [0.0, 0.0, 1.0], 0.0, 0.0)], vec![], vec![])).unwrap();
    let out = sim.step(None).remove(0);
    assert_eq!(out.depth.valid_count(), 0);
    assert!(out.labels.data.iter().all(|&l| l == 0));
    assert!(out.skeletons.is_empty());
}

#[test]
fn unit_box_at_two_meters() {
    let scene = bare_scene(
        vec![rig_at(0, [0.0, 0.0, 1.0], 0.0, 0.0)],
        vec![boxed([2.0, 0.0, 1.0], [1.0, 1.0, 1.0], 0.0)],
        vec![],
    );
    let mut sim = Simulator::new(scene).unwrap();
    let out = sim.step(None).remove(0);
    assert_eq!(out.depth.get(80, 60), 1500);
    assert_eq!(out.color.data[60 * 161 + 80], [10, 20, 30]);
    assert_eq!(out.labels.data[60 * 161 + 80], 0);
}

#[test]
fn human_labels_form_one_region() {
    let scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], 0.0, 15.0)], vec![], vec![standing(4, [2.0, 0.0], 180.0)]);
    let mut sim = Simulator::new(scene).unwrap();
    let out = sim.step(None).remove(0);
    let (w, h) = (out.labels.width, out.labels.height);
    let labeled: Vec<usize> = (0..w * h).filter(|&i| out.labels.data[i] != 0).collect();
    assert!(labeled.len() > 100, "{} labeled pixels", labeled.len());
    assert!(labeled.iter().all(|&i| out.labels.data[i] == 4));
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([labeled[0]]);
    seen[labeled[0]] = true;
    let mut reached = 0;
    while let Some(i) = queue.pop_front() {
        reached += 1;
        let (u, v) = (i % w, i / w);
        let mut push = |j: usize| {
            if !seen[j] && out.labels.data[j] != 0 {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if u > 0 {
            push(i - 1);
        }
        if u + 1 < w {
            push(i + 1);
        }
        if v > 0 {
            push(i - w);
        }
        if v + 1 < h {
            push(i + w);
        }
    }
    assert_eq!(reached, labeled.len(), "silhouette is not connected");
}

fn assert_on_surfaces(scene: &Scene, out: &CameraOutput, tolerance: f64) {
    let rig = scene.rig(out.camera_id).unwrap();
    let pose = rig.pose();
    let intr = scene.intrinsics_of(rig);
    let t = out.time;
    let mut shapes: Vec<Shape> = scene.room.iter().map(|p| p.shape.clone()).collect();
    for h in scene.humans.iter().filter(|h| h.is_present(t)) {
        shapes.extend(body_primitives(h.id, h.height, &h.joints_at(t), h.color()).into_iter().map(|p| p.shape));
    }
    let mut checked = 0;
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = out.depth.get(u, v);
            if d == 0 {
                continue;
            }
            let p = pose.apply(&unproject_pixel(&intr, u, v, d));
            let nearest = shapes.iter().map(|s| surface_distance(s, &p)).fold(f64::INFINITY, f64::min);
            assert!(nearest <= tolerance, "pixel ({u},{v}) is {nearest} m off every surface");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn rendered_depth_lies_on_scene_surfaces() {
    let mut scene = load("orbit");
    scene.interference.p_hole = 0.0;
    let mut sim = Simulator::new(scene.clone()).unwrap();
    for _ in 0..3 {
        for out in sim.step(None) {
            assert_on_surfaces(&scene, &out, 0.005);
        }
        for _ in 0..20 {
            sim.step_skeletons(None);
        }
    }
}

#[test]
fn cached_renderer_matches_brute_force() {
    let mut scene = load("cover");
    scene.interference.p_hole = 0.0;
    let mut sim = Simulator::new(scene.clone()).unwrap();
    let room: Vec<Solid> = scene.room.iter().map(Solid::new).collect();
    for _ in 0..4 {
        let outs = sim.step(None);
        let movers = human_solids(&scene, outs[0].time);
        let all: Vec<&Solid> = room.iter().chain(movers.iter()).collect();
        for out in outs {
            let rig = scene.rig(out.camera_id).unwrap();
            if rig.is_covered(out.time) {
                continue;
            }
            let brute = render_frame(&rig.pose(), &scene.intrinsics_of(rig), &all);
            assert_eq!(brute.depth, out.depth);
            assert_eq!(brute.color, out.color);
            assert_eq!(brute.labels, out.labels);
        }
        for _ in 0..40 {
            sim.step_skeletons(None);
        }
    }
}

#[test]
fn skeleton_noise_matches_model() {
    let scene = load("orbit");
    let mut sim = Simulator::new(scene).unwrap();
    let poses = sim.world_poses();
    let mut residuals = Vec::new();
    for _ in 0..120 {
        let truth: BTreeMap<u8, _> = sim.ground_truth().into_iter().map(|g| (g.human_id, g.joints)).collect();
        for (cam, skeletons) in sim.step_skeletons(None) {
            for s in skeletons {
                // Match by nearest torso since local ids are per camera.
                let torso = poses[&cam].apply(&s.joint(JointKind::Torso).position);
                let (_, joints) = truth
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.1[JointKind::Torso.index()] - torso).norm();
                        let db = (b.1[JointKind::Torso.index()] - torso).norm();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                let inverse = poses[&cam].inverse();
                for j in s.joints.iter().filter(|j| j.confidence >= 0.85) {
                    let expected = inverse.apply(&joints[j.kind.index()]);
                    let err = j.position - expected;
                    residuals.extend([err.x, err.y, err.z]);
                }
            }
        }
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(n > 10_000.0);
    // Gaussian: 0.27% of samples beyond 3 sigma, none plausibly beyond 5.
    let beyond = residuals.iter().filter(|r| r.abs() > 3.0 * JOINT_NOISE_M).count() as f64;
    assert!(beyond / n < 0.005, "{beyond} of {n} beyond 3 sigma");
    assert!(residuals.iter().all(|r| r.abs() < 5.0 * JOINT_NOISE_M));
    assert!(mean.abs() < 5e-4, "mean {mean}");
    assert!((sd - JOINT_NOISE_M).abs() < 5e-4, "sd {sd}");
}

#[test]
fn detection_latency_is_exact() {
    // Walks into the frustum from the side.
    let mut walker = standing(3, [2.0, 3.0], -90.0);
    walker.path = PathSpec::Waypoints {
        points: vec![Waypoint { pos: [2.0, 3.0], dwell: 0.0 }, Waypoint { pos: [2.0, -3.0], dwell: 0.0 }],
        speed: 1.0,
        facing_deg: None,
    };
    let scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], 0.0, 15.0)], vec![], vec![walker]);
    let rig = scene.rigs[0].clone();
    let (pose, intr) = (rig.pose().inverse(), scene.intrinsics_of(&rig));
    let mut sim = Simulator::new(scene.clone()).unwrap();
    let mut visible = Vec::new();
    let mut emitted = Vec::new();
    for f in 0..200u64 {
        let torso = scene.humans[0].joints_at(scene.time_of(f))[JointKind::Torso.index()];
        visible.push(intr.sees(&pose.apply(&torso)));
        emitted.push(sim.step_skeletons(None)[0].1.len());
    }
    let enter = visible.iter().position(|&v| v).unwrap();
    let exit = enter + visible[enter..].iter().position(|&v| !v).unwrap();
    assert!(exit - enter > 20);
    for (f, &n) in emitted.iter().enumerate() {
        let expect = usize::from(f >= enter + 10 && f < exit);
        assert_eq!(n, expect, "frame {f} (entered {enter}, left {exit})");
    }
}

#[test]
fn local_ids_are_recycled_after_exit() {
    let mut a = standing(1, [2.0, 0.0], 180.0);
    a.present = Some([0.0, 1.0]);
    let b = standing(2, [2.5, 0.6], 180.0);
    let mut c = standing(3, [2.5, -0.6], 180.0);
    c.present = Some([2.0, 10.0]);
    let scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], 0.0, 15.0)], vec![], vec![a, b, c]);
    let mut sim = Simulator::new(scene).unwrap();
    let mut ids_at = BTreeMap::new();
    for f in 0..120 {
        let (_, s) = sim.step_skeletons(None).remove(0);
        ids_at.insert(f, s.iter().map(|s| s.local_user_id).collect::<Vec<_>>());
    }
    assert_eq!(ids_at[&15], vec![1, 2]);
    assert_eq!(ids_at[&40], vec![2]);
    // The third person arrives at frame 60 and reuses the freed id 1.
    assert_eq!(ids_at[&69], vec![2]);
    assert_eq!(ids_at[&70], vec![1, 2]);
}

#[test]
fn determinism_and_seed_sensitivity() {
    let run = |seed: u64| {
        let mut scene = load("orbit");
        scene.seed = seed;
        let mut sim = Simulator::new(scene).unwrap();
        (0..12).flat_map(|_| sim.step(None)).collect::<Vec<_>>()
    };
    let a = run(5);
    assert_eq!(a, run(5));
    let b = run(6);
    assert_ne!(a, b);
}

#[test]
fn interference_single_camera_is_unchanged() {
    let mut scene = bare_scene(
        vec![rig_at(0, [0.0, 0.0, 1.0], 0.0, 0.0)],
        vec![boxed([2.0, 0.0, 1.0], [1.0, 1.0, 1.0], 0.0)],
        vec![],
    );
    scene.interference.p_hole = 1.0;
    let with = Simulator::new(scene.clone()).unwrap().step(None);
    scene.interference.p_hole = 0.0;
    assert_eq!(with, Simulator::new(scene).unwrap().step(None));
}

/// Pixels of `frame` whose surface point the other rig sees from an angle
/// beyond 90 degrees.
fn contested(scene: &Scene, me: &RigSpec, other: &RigSpec, depth: &depthgrid::model::DepthFrame) -> Vec<usize> {
    let pose = me.pose();
    let intr = scene.intrinsics_of(me);
    let other_pose = other.pose();
    let to_other = other_pose.inverse();
    let other_intr = scene.intrinsics_of(other);
    let mut out = Vec::new();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = depth.get(u, v);
            if d == 0 {
                continue;
            }
            let p = pose.apply(&unproject_pixel(&intr, u, v, d));
            let q = to_other.apply(&p);
            let (fx, fy) = (other_intr.fx(), other_intr.fy());
            let pu = other_intr.cx() + fx * q.x / q.z;
            let pv = other_intr.cy() + fy * q.y / q.z;
            let inside = q.z >= other_intr.min_range_m()
                && q.z <= other_intr.max_range_m()
                && pu >= -0.5
                && pv >= -0.5
                && pu < other_intr.width as f64 - 0.5
                && pv < other_intr.height as f64 - 0.5;
            let a = p - pose.translation;
            let b = p - other_pose.translation;
            if inside && a.angle(&b) > std::f64::consts::FRAC_PI_2 {
                out.push(v * intr.width + u);
            }
        }
    }
    out
}

#[test]
fn opposing_cameras_lose_every_contested_pixel() {
    let floor = boxed([0.0, 0.0, -0.05], [10.0, 10.0, 0.1], 0.0);
    let mut scene = bare_scene(
        vec![rig_at(0, [-1.5, 0.0, 1.85], 0.0, 30.0), rig_at(1, [1.5, 0.0, 1.85], 180.0, 30.0)],
        vec![floor, boxed([0.0, 0.0, 0.5], [0.4, 0.4, 1.0], 20.0)],
        vec![],
    );
    scene.interference.p_hole = 0.0;
    let clean = Simulator::new(scene.clone()).unwrap().step(None);
    scene.interference.p_hole = 1.0;
    let holed = Simulator::new(scene.clone()).unwrap().step(None);
    for k in 0..2 {
        let hit = contested(&scene, &scene.rigs[k], &scene.rigs[1 - k], &clean[k].depth);
        assert!(hit.len() > 500, "{} contested pixels", hit.len());
        for i in 0..clean[k].depth.data.len() {
            let expect = if hit.contains(&i) { 0 } else { clean[k].depth.data[i] };
            assert_eq!(holed[k].depth.data[i], expect, "camera {k} pixel {i}");
        }
    }
}

#[test]
fn hole_fraction_in_overlap_band() {
    let mut scene = load("handoff");
    scene.humans.clear();
    // Pillars standing in the strip both cameras cover.
    for x in [0.75, 0.95] {
        scene.room.push(Primitive {
            shape: Shape::Capsule {
                a: [x, 1.75, 0.3],
                b: [x, 1.75, 1.6],
                radius: 0.08,
            },
            color: [90, 90, 90],
            owner: None,
        });
    }
    scene.interference.p_hole = 0.0;
    let clean = Simulator::new(scene.clone()).unwrap().step(None);
    let bands: Vec<Vec<usize>> = (0..2)
        .map(|k| contested(&scene, &scene.rigs[k], &scene.rigs[1 - k], &clean[k].depth))
        .collect();
    assert!(bands.iter().all(|b| b.len() > 200), "band sizes {:?}", bands.iter().map(Vec::len).collect::<Vec<_>>());
    scene.interference.p_hole = 0.3;
    let (mut zeroed, mut total) = (0usize, 0usize);
    for seed in 0..10 {
        scene.seed = seed;
        let mut sim = Simulator::new(scene.clone()).unwrap();
        for _ in 0..3 {
            let outs = sim.step(None);
            for k in 0..2 {
                total += bands[k].len();
                zeroed += bands[k].iter().filter(|&&i| outs[k].depth.data[i] == 0).count();
                let outside = (0..outs[k].depth.data.len()).filter(|i| !bands[k].contains(i));
                assert!(outside.into_iter().all(|i| outs[k].depth.data[i] == clean[k].depth.data[i]));
            }
        }
    }
    let fraction = zeroed as f64 / total as f64;
    assert!((fraction - 0.3).abs() <= 0.05, "hole fraction {fraction}");
}

/// Independent segment-versus-box test for the occlusion oracle.
fn segment_hits_box(from: &Vec3, to: &Vec3, center: [f64; 3], size: [f64; 3]) -> bool {
    let d = to - from;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..3 {
        let lo = center[axis] - size[axis] / 2.0;
        let hi = center[axis] + size[axis] / 2.0;
        if d[axis].abs() < 1e-12 {
            if from[axis] < lo || from[axis] > hi {
                return false;
            }
            continue;
        }
        let (mut a, mut b) = ((lo - from[axis]) / d[axis], (hi - from[axis]) / d[axis]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
    }
    t0 <= t1
}

#[test]
fn counter_hides_seated_legs_from_front_camera() {
    let scene = load("sitdown");
    let counter = match scene.room[1].shape {
        Shape::Box { center, size, .. } => (center, size),
        _ => unreachable!(),
    };
    let mut sim = Simulator::new(scene.clone()).unwrap();
    let front = scene.rigs[0].position.into();
    let legs = [JointKind::LeftKnee, JointKind::RightKnee, JointKind::LeftFoot, JointKind::RightFoot];
    let upper = [
        JointKind::Head,
        JointKind::Neck,
        JointKind::Torso,
        JointKind::LeftShoulder,
        JointKind::RightShoulder,
        JointKind::LeftElbow,
        JointKind::RightElbow,
    ];
    let mut seated_frames = 0;
    for f in 0..300u64 {
        let t = scene.time_of(f);
        let truth = sim.ground_truth();
        let outs = sim.step_skeletons(None);
        if !(4.5..7.0).contains(&t) {
            continue;
        }
        seated_frames += 1;
        let joints = truth[0].joints;
        for k in legs {
            assert!(segment_hits_box(&front, &joints[k.index()], counter.0, counter.1));
        }
        let s = &outs[0].1[0];
        for k in legs {
            assert!(s.joint(k).confidence < 0.5, "{k:?} {}", s.joint(k).confidence);
        }
        for k in upper {
            assert!(!segment_hits_box(&front, &joints[k.index()], counter.0, counter.1));
            assert!(s.joint(k).confidence >= 0.85, "{k:?}");
        }
        for side in &outs[1..] {
            for k in legs {
                assert!(side.1[0].joint(k).confidence >= 0.85, "side camera {} {k:?}", side.0);
            }
        }
    }
    assert_eq!(seated_frames, 75);
}

#[test]
fn humans_beyond_range_are_not_detected() {
    let scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], 0.0, 15.0)], vec![], vec![standing(1, [4.0, 0.0], 180.0)]);
    let mut sim = Simulator::new(scene).unwrap();
    for _ in 0..30 {
        assert!(sim.step_skeletons(None)[0].1.is_empty());
    }
}

#[test]
fn fully_visible_human_has_confident_joints() {
    let scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], 0.0, 25.0)], vec![], vec![standing(1, [3.0, 0.0], 180.0)]);
    let mut sim = Simulator::new(scene).unwrap();
    let out = (0..11).map(|_| sim.step_skeletons(None)).last().unwrap();
    let s = &out[0].1[0];
    assert_eq!(s.joints.len(), 15);
    assert!(s.joints.iter().all(|j| j.confidence >= 0.85), "{:?}", s.joints.map(|j| j.confidence));
}

#[test]
fn covered_camera_goes_dark_and_redetects() {
    let mut rig = rig_at(0, [0.0, 0.0, 1.85], 0.0, 15.0);
    rig.cover = vec![[1.0, 2.0]];
    let scene = bare_scene(
        vec![rig],
        vec![boxed([0.0, 0.0, -0.05], [10.0, 10.0, 0.1], 0.0)],
        vec![standing(1, [2.0, 0.0], 180.0)],
    );
    let mut sim = Simulator::new(scene).unwrap();
    let mut counts = Vec::new();
    for _ in 0..90 {
        let out = sim.step(None).remove(0);
        if out.covered {
            assert_eq!(out.depth.valid_count(), 0);
            assert!(out.color.data.iter().all(|c| *c == [0, 0, 0]));
        } else {
            assert!(out.depth.valid_count() > 0);
        }
        counts.push(out.skeletons.len());
    }
    assert_eq!(&counts[..10], &[0; 10]);
    assert!(counts[10..30].iter().all(|&c| c == 1));
    assert!(counts[30..70].iter().all(|&c| c == 0));
    assert_eq!(counts[79], 1);
}

#[test]
fn ground_truth_kinematics() {
    let still = standing(1, [0.5, 0.5], 0.0);
    assert_eq!(still.joints_at(2.0), still.joints_at(3.0));

    let mut walker = standing(2, [0.0, 0.0], 0.0);
    walker.path = PathSpec::Waypoints {
        points: vec![Waypoint { pos: [0.0, 0.0], dwell: 0.0 }, Waypoint { pos: [5.0, 0.0], dwell: 0.0 }],
        speed: 1.0,
        facing_deg: None,
    };
    let torso = |t: f64| walker.joints_at(t)[JointKind::Torso.index()];
    assert!(((torso(2.0) - torso(1.0)).norm() - 1.0).abs() < 1e-12);

    let mut sitter = standing(3, [0.0, 0.0], 0.0);
    sitter.height = 1.75;
    sitter.postures = vec![PostureKey { time: 1.0, posture: Posture::Sit }];
    let hip = |t: f64| sitter.joints_at(t)[JointKind::LeftHip.index()].z;
    assert!((hip(0.5) - 0.95).abs() < 1e-12);
    assert!((hip(3.0) - 0.50).abs() < 1e-12);

    let scene = bare_scene(vec![rig_at(0, [0.0; 3], 0.0, 0.0)], vec![], vec![still.clone(), walker.clone()]);
    let gt = ground_truth(&scene, 1.0);
    assert_eq!(gt.len(), 2);
    assert_eq!(gt[1].joints, walker.joints_at(1.0));
}

#[test]
fn scene_validation() {
    let mut scene = load("orbit");
    scene.humans[0].height = 2.3;
    assert!(Simulator::new(scene).is_err());
    let mut scene = load("orbit");
    scene.rigs[1].camera_id = scene.rigs[0].camera_id;
    assert!(Simulator::new(scene).is_err());
    let mut scene = load("orbit");
    scene.room.push(Primitive {
        shape: Shape::Sphere {
            center: [0.0; 3],
            radius: 0.0,
        },
        color: [0; 3],
        owner: None,
    });
    assert!(Simulator::new(scene).is_err());
    assert!(Simulator::from_file("/nonexistent/scene.json").is_err());
}

#[test]
fn golden_scenes_load() {
    for name in ["orbit", "sitdown", "cover", "handoff"] {
        let scene = load(name);
        assert_eq!(Scene::from_json(&scene.to_json()).unwrap(), scene);
    }
    assert_eq!(load("orbit").humans.len(), 2);
    assert_eq!(load("orbit").rigs.len(), 5);
    assert_eq!(load("cover").humans.len(), 5);
}

#[test]
fn calibration_set_maps_into_reference_frame() {
    let sim = Simulator::new(load("orbit")).unwrap();
    let calib = sim.calibration_set();
    let poses = sim.world_poses();
    let p = Vec3::new(0.3, -0.2, 2.0);
    let reference = poses[&calib.reference].inverse();
    for (cam, pose) in &poses {
        let via_calib = calib.get(*cam).unwrap().apply(&p);
        let via_world = reference.apply(&pose.apply(&p));
        assert!((via_calib - via_world).norm() < 1e-12);
    }
    assert_eq!(calib.get(calib.reference), Some(&RigidTransform::identity()));
}

fn arb_primitive() -> impl Strategy<Value = Shape> {
    let center = || (1.2f64..3.0, -0.6f64..0.6, 0.4f64..1.6);
    prop_oneof![
        (center(), (0.1f64..0.8, 0.1f64..0.8, 0.1f64..0.8), -90.0f64..90.0).prop_map(|(c, s, yaw)| Shape::Box {
            center: [c.0, c.1, c.2],
            size: [s.0, s.1, s.2],
            yaw_deg: yaw
        }),
        (center(), 0.05f64..0.5).prop_map(|(c, r)| Shape::Sphere { center: [c.0, c.1, c.2], radius: r }),
        (center(), (-0.4f64..0.4, -0.4f64..0.4, -0.4f64..0.4), 0.03f64..0.3).prop_map(|(c, d, r)| Shape::Capsule {
            a: [c.0 - d.0, c.1 - d.1, c.2 - d.2],
            b: [c.0 + d.0, c.1 + d.1, c.2 + d.2],
            radius: r
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unprojected_depth_lies_on_random_primitives(shapes in prop::collection::vec(arb_primitive(), 1..4), yaw in -10.0f64..10.0) {
        let room = shapes.into_iter().map(|shape| Primitive { shape, color: [1, 2, 3], owner: None }).collect();
        let mut scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.0], yaw, 5.0)], room, vec![]);
        scene.intrinsics = scene.intrinsics.with_resolution(64, 48);
        let out = Simulator::new(scene.clone()).unwrap().step(None).remove(0);
        assert_on_surfaces(&scene, &out, 0.005);
    }

    #[test]
    fn cached_render_equals_brute_force_for_random_people(
        x in 0.8f64..3.2, y in -1.5f64..1.5, facing in -180.0f64..180.0, yaw in -30.0f64..30.0, pitch in 0.0f64..30.0
    ) {
        let humans = vec![standing(1, [x, y], facing), standing(2, [x + 0.6, -y], -facing)];
        let room = vec![boxed([0.0, 0.0, -0.05], [10.0, 10.0, 0.1], 0.0), boxed([2.0, 0.8, 0.5], [0.4, 0.4, 1.0], 15.0)];
        let mut scene = bare_scene(vec![rig_at(0, [0.0, 0.0, 1.85], yaw, pitch)], room, humans);
        scene.intrinsics = scene.intrinsics.with_resolution(80, 60);
        let out = Simulator::new(scene.clone()).unwrap().step(None).remove(0);
        let room: Vec<Solid> = scene.room.iter().map(Solid::new).collect();
        let movers = human_solids(&scene, 0.0);
        let all: Vec<&Solid> = room.iter().chain(movers.iter()).collect();
        let brute = render_frame(&scene.rigs[0].pose(), &scene.intrinsics, &all);
        prop_assert_eq!(brute.depth, out.depth);
        prop_assert_eq!(brute.labels, out.labels);
    }
}

