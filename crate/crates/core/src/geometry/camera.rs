use crate::model::{CameraIntrinsics, ColorFrame, DepthFrame, PointCloud, Vec3};

/// Camera-frame point for pixel `(u, v)` at depth `depth_mm`.
/// +x right, +y down, +z along the optical axis.
pub fn unproject_pixel(intr: &CameraIntrinsics, u: usize, v: usize, depth_mm: u16) -> Vec3 {
    let z = depth_mm as f64 / 1000.0;
    Vec3::new(
        (u as f64 - intr.cx()) * z / intr.fx(),
        (v as f64 - intr.cy()) * z / intr.fy(),
        z,
    )
}

/// Converts every nonzero depth pixel into a point. The intrinsics' field of
/// view is used with the depth frame's own resolution, so downscaled frames
/// unproject correctly.
pub fn unproject(
    depth: &DepthFrame,
    intrinsics: &CameraIntrinsics,
    color: Option<&ColorFrame>,
) -> PointCloud {
    let intr = intrinsics.with_resolution(depth.width, depth.height);
    let color = color.filter(|c| c.width == depth.width && c.height == depth.height);
    let mut positions = Vec::new();
    let mut colors = color.map(|_| Vec::new());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            let d = depth.data[i];
            if d == 0 {
                continue;
            }
            positions.push(unproject_pixel(&intr, u, v, d));
            if let (Some(out), Some(c)) = (colors.as_mut(), color) {
                out.push(c.data[i]);
            }
        }
    }
    PointCloud { positions, colors }
}
