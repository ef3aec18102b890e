//! Camera math and registration: depth unprojection, least-squares rigid
//! fitting, ICP refinement, cloud fusion and subsampling, camera layout
//! planning and bandwidth accounting.

mod calibfile;
mod camera;
mod cloud;
mod icp;
mod kdtree;
mod layout;
mod rigid;

pub use calibfile::{read_correspondences, CalibrationSet};
pub use camera::{unproject, unproject_pixel};
pub use cloud::{fuse_clouds, read_ply, subsample, write_ply};
pub use icp::{icp_refine, IcpOutcome, IcpParams};
pub use kdtree::KdTree;
pub use layout::{
    bandwidth, plan_layout, BandwidthModel, LayoutPlan, Placement, Side, SideLink, Wall,
    DEFAULT_BYTES_PER_FRAME, DEFAULT_FPS, DEFAULT_MOUNT_HEIGHT_M, DEFAULT_OVERLAP_M,
};
pub use rigid::{fit_rigid, rms_error, Correspondence};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate point configuration (collinear or coincident)")]
    Degenerate,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no point pairs within {0} m")]
    NoOverlap(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
