//! Calibrates the cameras of a one-person scene against its first camera:
//! a rigid fit on joint correspondences gathered while the person moves, then
//! ICP on the depth clouds, kept only when it does not worsen the joint
//! residual.
//!
//! cargo run --example calibrate_cameras -- [scene.json]

use std::collections::BTreeMap;

use depthgrid::geometry::{fit_rigid, icp_refine, rms_error, subsample, Correspondence, IcpParams};
use depthgrid::model::{PointCloud, RigidTransform};
use depthgrid::sim::Simulator;
use nalgebra::Rotation3;

fn rotation_error_deg(a: &RigidTransform, b: &RigidTransform) -> f64 {
    Rotation3::from_matrix_unchecked(a.rotation.transpose() * b.rotation).angle().to_degrees()
}

fn main() {
    let scene = std::env::args()
        .nth(1)
        .unwrap_or_else(|| format!("{}/scenes/sitdown.json", env!("CARGO_MANIFEST_DIR")));
    let mut sim = Simulator::from_file(&scene).expect("scene");
    let truth = sim.calibration_set();
    let reference = truth.reference;

    let mut pairs: BTreeMap<u16, Vec<Correspondence>> = BTreeMap::new();
    let mut clouds: BTreeMap<u16, PointCloud> = BTreeMap::new();
    for _ in 0..240 {
        let outs = sim.step(None);
        for out in &outs {
            let intr = sim.scene().intrinsics_of(sim.scene().rig(out.camera_id).unwrap());
            clouds.insert(out.camera_id, subsample(&out.depth, &intr, 2, None).unwrap());
        }
        let Some(refs) = outs.iter().find(|o| o.camera_id == reference) else { continue };
        let [r] = refs.skeletons.as_slice() else { continue };
        for out in outs.iter().filter(|o| o.camera_id != reference) {
            let [s] = out.skeletons.as_slice() else { continue };
            for (j, k) in s.joints.iter().zip(&r.joints) {
                if j.confidence > 0.8 && k.confidence > 0.8 {
                    pairs.entry(out.camera_id).or_default().push(Correspondence::new(j.position, k.position));
                }
            }
        }
    }

    let params = IcpParams::default();
    for camera in truth.transforms.keys().filter(|&&c| c != reference) {
        let expected = truth.get(*camera).unwrap();
        let Some(pairs) = pairs.get(camera) else {
            println!("camera {camera}: never saw the person together with camera {reference}");
            continue;
        };
        let fit = match fit_rigid(pairs) {
            Ok(t) => t,
            Err(e) => {
                println!("camera {camera}: {e}");
                continue;
            }
        };
        let fit_rms = rms_error(&fit, pairs);
        println!(
            "camera {camera}: {} pairs, fit rms {fit_rms:.4} m, off by {:.3} deg / {:.4} m",
            pairs.len(),
            rotation_error_deg(&fit, expected),
            (fit.translation - expected.translation).norm()
        );
        match icp_refine(&clouds[camera], &clouds[&reference], &fit, &params) {
            Ok(o) if rms_error(&o.transform, pairs) <= fit_rms => println!(
                "  icp kept: {} iterations, cloud rms {:.4} m, off by {:.3} deg / {:.4} m",
                o.iterations,
                o.final_rms(),
                rotation_error_deg(&o.transform, expected),
                (o.transform.translation - expected.translation).norm()
            ),
            Ok(o) => println!(
                "  icp dropped: joint rms would rise to {:.4} m (cloud rms {:.4} m)",
                rms_error(&o.transform, pairs),
                o.final_rms()
            ),
            Err(e) => println!("  icp: {e}"),
        }
    }
}
