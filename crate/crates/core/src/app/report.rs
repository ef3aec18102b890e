use super::AppError;
use crate::geometry::{bandwidth, plan_layout, BandwidthModel};

fn mbps(bits: u64) -> String {
    format!("{}", bits as f64 / 1e6)
}

/// One line per camera count from 1 to `max_cameras`.
pub fn bandwidth_table(max_cameras: u64, bytes_per_frame: u64, fps: u64) -> Vec<String> {
    let mut lines = vec!["cameras  bytes_per_frame  fps  mbps".to_string()];
    for n in 1..=max_cameras {
        lines.push(bandwidth_report(n, bytes_per_frame, fps));
    }
    lines
}

pub fn bandwidth_report(cameras: u64, bytes_per_frame: u64, fps: u64) -> String {
    let bits = bandwidth(&BandwidthModel {
        cameras,
        bytes_per_frame,
        fps,
    });
    format!("{cameras:>7}  {bytes_per_frame:>15}  {fps:>3}  {}", mbps(bits))
}

pub fn plan_report(depth: f64, hfov_deg: f64, overlap: f64, cameras: usize) -> Result<Vec<String>, AppError> {
    let plan = plan_layout(depth, hfov_deg, overlap).map_err(|e| AppError::Input(e.to_string()))?;
    let mut lines = vec![
        format!("coverage_depth {:.3} m", plan.coverage_depth),
        format!("half_width {:.3} m", plan.half_width),
        format!("naive_spacing {:.3} m", plan.naive_spacing),
        format!("spacing {:.2} m", plan.camera_spacing),
        format!("mount_height {:.2} m", plan.mount_height),
    ];
    for p in plan.placements(cameras) {
        lines.push(format!(
            "camera {} wall={:?} x={:.3} y={:.3} z={:.2} yaw={}",
            p.camera_index, p.wall, p.position[0], p.position[1], p.position[2], p.yaw_deg
        ));
    }
    for l in plan.side_links(cameras) {
        lines.push(format!("link {} {:?} <-> {} {:?}", l.camera_a, l.side_a, l.camera_b, l.side_b));
    }
    Ok(lines)
}
