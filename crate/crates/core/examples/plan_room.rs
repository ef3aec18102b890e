//! Plans a corridor of facing cameras and prices the streams it needs.
//!
//! cargo run --example plan_room -- [depth_m] [overlap_m] [cameras]

use depthgrid::geometry::{bandwidth, plan_layout, BandwidthModel};

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("number"));
    let depth = args.next().unwrap_or(3.5);
    let overlap = args.next().unwrap_or(0.5);
    let cameras = args.next().unwrap_or(6.0) as usize;

    let plan = plan_layout(depth, 57.5, overlap).expect("layout");
    println!(
        "{depth} m deep: each camera covers {:.2} m of wall, cameras every {:.2} m",
        2.0 * plan.half_width,
        plan.camera_spacing
    );
    for p in plan.placements(cameras) {
        println!("  camera {} on {:?} wall at ({:.2}, {:.2}, {:.2}) yaw {}", p.camera_index, p.wall, p.position[0], p.position[1], p.position[2], p.yaw_deg);
    }
    for l in plan.side_links(cameras) {
        println!("  leaving camera {} {:?} enters camera {} {:?}", l.camera_a, l.side_a, l.camera_b, l.side_b);
    }

    // Bytes per frame: the model's default, raw VGA depth and labels, and a
    // compressed stream.
    for (name, bytes) in [("default", 70_000), ("raw vga", 640 * 480 * 3), ("compressed", 30_000)] {
        let mbps = bandwidth(&BandwidthModel { cameras: cameras as u64, bytes_per_frame: bytes, fps: 30 }) as f64 / 1e6;
        println!("{name:>10}: {bytes} bytes/frame x {cameras} cameras x 30 fps = {mbps} Mbps");
    }
}
