use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::model::Vec3;

pub const DEFAULT_OVERLAP_M: f64 = 0.5;
pub const DEFAULT_MOUNT_HEIGHT_M: f64 = 1.85;
pub const DEFAULT_BYTES_PER_FRAME: u64 = 70_000;
pub const DEFAULT_FPS: u64 = 30;

/// Horizontal image side, as seen by the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Side of the image a camera-frame point falls on (x grows to the right).
    pub fn of_camera_x(x: f64) -> Side {
        if x < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// Wall at y = 0, cameras looking towards +y.
    Near,
    /// Wall at y = coverage depth, cameras looking towards -y.
    Far,
}

/// A boundary correspondence: leaving camera `a` through side `side_a` means
/// showing up in camera `b` through side `side_b`, and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideLink {
    pub camera_a: u16,
    pub side_a: Side,
    pub camera_b: u16,
    pub side_b: Side,
}

impl SideLink {
    pub fn connects(&self, from: (u16, Side), to: (u16, Side)) -> bool {
        let (ea, eb) = ((self.camera_a, self.side_a), (self.camera_b, self.side_b));
        (ea == from && eb == to) || (eb == from && ea == to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub camera_index: u16,
    pub wall: Wall,
    /// Camera position in the room frame (z up, floor at 0).
    pub position: [f64; 3],
    pub yaw_deg: f64,
}

impl Placement {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub coverage_depth: f64,
    pub hfov_deg: f64,
    pub half_width: f64,
    pub naive_spacing: f64,
    pub camera_spacing: f64,
    pub overlap: f64,
    pub mount_height: f64,
}

/// Half of the covered width at depth `d` is `tan(hfov/2)·d`. Cameras on one
/// wall sit `2h - overlap` apart, the opposite wall is shifted by half that.
pub fn plan_layout(coverage_depth: f64, hfov_deg: f64, overlap: f64) -> Result<LayoutPlan, GeometryError> {
    if !(coverage_depth > 0.0 && coverage_depth.is_finite()) {
        return Err(GeometryError::InvalidInput(format!(
            "coverage depth must be positive, got {coverage_depth}"
        )));
    }
    if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(GeometryError::InvalidInput(format!(
            "hfov must be in (0, 180) degrees, got {hfov_deg}"
        )));
    }
    let half_width = (hfov_deg.to_radians() / 2.0).tan() * coverage_depth;
    let naive_spacing = 2.0 * half_width;
    if !(overlap >= 0.0 && overlap < naive_spacing) {
        return Err(GeometryError::InvalidInput(format!(
            "overlap must be in [0, {naive_spacing:.3}) m, got {overlap}"
        )));
    }
    Ok(LayoutPlan {
        coverage_depth,
        hfov_deg,
        half_width,
        naive_spacing,
        camera_spacing: naive_spacing - overlap,
        overlap,
        mount_height: DEFAULT_MOUNT_HEIGHT_M,
    })
}

impl LayoutPlan {
    /// Cameras in installation order, alternating between the two walls.
    pub fn placements(&self, count: usize) -> Vec<Placement> {
        (0..count)
            .map(|i| {
                let slot = (i / 2) as f64 * self.camera_spacing;
                let (wall, x, y, yaw) = if i % 2 == 0 {
                    (Wall::Near, slot, 0.0, 90.0)
                } else {
                    (
                        Wall::Far,
                        slot + self.camera_spacing / 2.0,
                        self.coverage_depth,
                        -90.0,
                    )
                };
                Placement {
                    camera_index: i as u16,
                    wall,
                    position: [x, y, self.mount_height],
                    yaw_deg: yaw,
                }
            })
            .collect()
    }

    /// Boundary correspondences between consecutive cameras. Opposite cameras
    /// mirror the horizontal axis, so a boundary pairs equal sides.
    pub fn side_links(&self, count: usize) -> Vec<SideLink> {
        (0..count.saturating_sub(1))
            .map(|i| {
                let side = if i % 2 == 0 { Side::Right } else { Side::Left };
                SideLink {
                    camera_a: i as u16,
                    side_a: side,
                    camera_b: i as u16 + 1,
                    side_b: side,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthModel {
    pub cameras: u64,
    pub bytes_per_frame: u64,
    pub fps: u64,
}

impl BandwidthModel {
    pub fn with_cameras(cameras: u64) -> Self {
        BandwidthModel {
            cameras,
            bytes_per_frame: DEFAULT_BYTES_PER_FRAME,
            fps: DEFAULT_FPS,
        }
    }
}

/// Bits per second needed to stream every camera: 8·N·D·F.
pub fn bandwidth(model: &BandwidthModel) -> u64 {
    8 * model.cameras * model.bytes_per_frame * model.fps
}
