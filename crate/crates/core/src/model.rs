//! Domain types shared by every subsystem: sensor rasters, skeletons,
//! point clouds and rigid transforms.
//!
//! Units: depth in integer millimeters, positions in meters, angles in
//! degrees at API boundaries. All types are plain values; nothing here holds
//! interior mutability, so they can be shared freely across threads.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

pub const JOINT_COUNT: usize = 15;
pub const MAX_USER_LABEL: u8 = 15;
pub const DEFAULT_MIN_RANGE_MM: u16 = 500;
pub const DEFAULT_MAX_RANGE_MM: u16 = 3500;
/// Joints below this confidence are ignored by center-of-mass and averaging.
pub const CONFIDENCE_FLOOR: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("raster data length {actual} does not match {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
}

/// One violated invariant, as reported by [`Validate::violations`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl Violation {
    fn new(msg: impl Into<String>) -> Self {
        Violation(msg.into())
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Total invariant check. An empty list means the value is valid.
pub trait Validate {
    fn violations(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}

fn check_len(width: usize, height: usize, len: usize, out: &mut Vec<Violation>) {
    if width.checked_mul(height) != Some(len) {
        out.push(Violation::new(format!(
            "data length {len} != {width}x{height}"
        )));
    }
}

/// Row-major depth raster, millimeters, 0 = no reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self, ModelError> {
        if width * height != data.len() {
            return Err(ModelError::LengthMismatch {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(DepthFrame {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        DepthFrame {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.data[v * self.width + u]
    }

    /// Invariant check against an explicit camera range.
    pub fn violations_in_range(&self, min_mm: u16, max_mm: u16) -> Vec<Violation> {
        let mut out = Vec::new();
        check_len(self.width, self.height, self.data.len(), &mut out);
        let outside = self
            .data
            .iter()
            .filter(|&&d| d != 0 && (d < min_mm || d > max_mm))
            .count();
        if outside > 0 {
            out.push(Violation::new(format!(
                "{outside} depth values outside [{min_mm}, {max_mm}] mm"
            )));
        }
        out
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d != 0).count()
    }
}

impl Validate for DepthFrame {
    fn violations(&self) -> Vec<Violation> {
        self.violations_in_range(DEFAULT_MIN_RANGE_MM, DEFAULT_MAX_RANGE_MM)
    }
}

/// Row-major user-id raster, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl LabelFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ModelError> {
        if width * height != data.len() {
            return Err(ModelError::LengthMismatch {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(LabelFrame {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        LabelFrame {
            width,
            height,
            data: vec![0; width * height],
        }
    }
}

impl Validate for LabelFrame {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_len(self.width, self.height, self.data.len(), &mut out);
        if self.data.iter().any(|&v| v > MAX_USER_LABEL) {
            out.push(Violation::new("label > 15"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl ColorFrame {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self, ModelError> {
        if width * height != data.len() {
            return Err(ModelError::LengthMismatch {
                width,
                height,
                actual: data.len(),
            });
        }
        Ok(ColorFrame {
            width,
            height,
            data,
        })
    }

    pub fn black(width: usize, height: usize) -> Self {
        ColorFrame {
            width,
            height,
            data: vec![[0; 3]; width * height],
        }
    }
}

impl Validate for ColorFrame {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_len(self.width, self.height, self.data.len(), &mut out);
        out
    }
}

/// Pinhole camera description. The principal point is the image center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub min_range_mm: u16,
    pub max_range_mm: u16,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            width: 160,
            height: 120,
            hfov_deg: 57.5,
            vfov_deg: 45.0,
            min_range_mm: DEFAULT_MIN_RANGE_MM,
            max_range_mm: DEFAULT_MAX_RANGE_MM,
        }
    }
}

impl CameraIntrinsics {
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn fx(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    pub fn fy(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.vfov_deg.to_radians() / 2.0).tan()
    }

    /// Principal point, at the center of the pixel grid.
    pub fn cx(&self) -> f64 {
        (self.width as f64 - 1.0) / 2.0
    }

    pub fn cy(&self) -> f64 {
        (self.height as f64 - 1.0) / 2.0
    }

    pub fn min_range_m(&self) -> f64 {
        self.min_range_mm as f64 / 1000.0
    }

    pub fn max_range_m(&self) -> f64 {
        self.max_range_mm as f64 / 1000.0
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    /// Returns `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        if p.z <= 1e-9 {
            return None;
        }
        Some((
            self.cx() + self.fx() * p.x / p.z,
            self.cy() + self.fy() * p.y / p.z,
        ))
    }

    /// True when the point projects inside the image and lies within range.
    pub fn sees(&self, p: &Vec3) -> bool {
        match self.project(p) {
            Some((u, v)) => {
                u >= -0.5
                    && v >= -0.5
                    && u < self.width as f64 - 0.5
                    && v < self.height as f64 - 0.5
                    && p.z >= self.min_range_m()
                    && p.z <= self.max_range_m()
            }
            None => false,
        }
    }
}

impl Validate for CameraIntrinsics {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            out.push(Violation::new("hfov outside (0, 180)"));
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            out.push(Violation::new("vfov outside (0, 180)"));
        }
        if self.min_range_mm >= self.max_range_mm {
            out.push(Violation::new("min_range_mm >= max_range_mm"));
        }
        if self.width == 0 || self.height == 0 {
            out.push(Violation::new("empty resolution"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum JointKind {
    Head = 0,
    Neck,
    Torso,
    LeftShoulder,
    LeftElbow,
    LeftHand,
    RightShoulder,
    RightElbow,
    RightHand,
    LeftHip,
    LeftKnee,
    LeftFoot,
    RightHip,
    RightKnee,
    RightFoot,
}

impl JointKind {
    pub const ALL: [JointKind; JOINT_COUNT] = [
        JointKind::Head,
        JointKind::Neck,
        JointKind::Torso,
        JointKind::LeftShoulder,
        JointKind::LeftElbow,
        JointKind::LeftHand,
        JointKind::RightShoulder,
        JointKind::RightElbow,
        JointKind::RightHand,
        JointKind::LeftHip,
        JointKind::LeftKnee,
        JointKind::LeftFoot,
        JointKind::RightHip,
        JointKind::RightKnee,
        JointKind::RightFoot,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn is_leg(self) -> bool {
        matches!(
            self,
            JointKind::LeftKnee | JointKind::LeftFoot | JointKind::RightKnee | JointKind::RightFoot
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            JointKind::Head => "head",
            JointKind::Neck => "neck",
            JointKind::Torso => "torso",
            JointKind::LeftShoulder => "left_shoulder",
            JointKind::LeftElbow => "left_elbow",
            JointKind::LeftHand => "left_hand",
            JointKind::RightShoulder => "right_shoulder",
            JointKind::RightElbow => "right_elbow",
            JointKind::RightHand => "right_hand",
            JointKind::LeftHip => "left_hip",
            JointKind::LeftKnee => "left_knee",
            JointKind::LeftFoot => "left_foot",
            JointKind::RightHip => "right_hip",
            JointKind::RightKnee => "right_knee",
            JointKind::RightFoot => "right_foot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub kind: JointKind,
    pub position: Vec3,
    pub confidence: f64,
    /// Carried end-to-end but never used by the fusion math.
    pub orientation: Option<UnitQuaternion<f64>>,
}

impl Joint {
    pub fn new(kind: JointKind, position: Vec3, confidence: f64) -> Self {
        Joint {
            kind,
            position,
            confidence,
            orientation: None,
        }
    }
}

impl Validate for Joint {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.confidence) {
            out.push(Violation::new(format!(
                "{} confidence {} outside [0, 1]",
                self.kind.name(),
                self.confidence
            )));
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            out.push(Violation::new(format!(
                "{} position not finite",
                self.kind.name()
            )));
        }
        out
    }
}

pub type JointSet = [Joint; JOINT_COUNT];

/// Builds a joint set from a position per kind, all at the given confidence.
pub fn joint_set(positions: &[Vec3; JOINT_COUNT], confidence: f64) -> JointSet {
    std::array::from_fn(|i| Joint::new(JointKind::ALL[i], positions[i], confidence))
}

fn joint_set_violations(joints: &JointSet, out: &mut Vec<Violation>) {
    for (i, j) in joints.iter().enumerate() {
        if j.kind.index() != i {
            out.push(Violation::new(format!(
                "joint slot {i} holds {}",
                j.kind.name()
            )));
        }
        out.extend(j.violations());
    }
}

/// Confidence-weighted mean of the joints at or above the confidence floor;
/// unweighted mean of all joints when none qualifies.
pub fn center_of_mass(joints: &[Joint]) -> Vec3 {
    let mut acc = Vec3::zeros();
    let mut weight = 0.0;
    for j in joints.iter().filter(|j| j.confidence >= CONFIDENCE_FLOOR) {
        acc += j.position * j.confidence;
        weight += j.confidence;
    }
    if weight > 0.0 {
        return acc / weight;
    }
    if joints.is_empty() {
        return Vec3::zeros();
    }
    joints.iter().map(|j| j.position).sum::<Vec3>() / joints.len() as f64
}

/// A skeleton as detected by one camera, in that camera's frame unless the
/// caller has transformed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSkeleton {
    pub camera_id: u16,
    pub local_user_id: u8,
    pub joints: JointSet,
}

impl InputSkeleton {
    pub fn center_of_mass(&self) -> Vec3 {
        center_of_mass(&self.joints)
    }

    pub fn joint(&self, kind: JointKind) -> &Joint {
        &self.joints[kind.index()]
    }

    pub fn transformed(&self, t: &RigidTransform) -> InputSkeleton {
        let mut out = self.clone();
        for j in out.joints.iter_mut() {
            j.position = t.apply(&j.position);
            if let Some(q) = j.orientation {
                let r = nalgebra::Rotation3::from_matrix_unchecked(t.rotation);
                j.orientation = Some(UnitQuaternion::from_rotation_matrix(&r) * q);
            }
        }
        out
    }
}

impl Validate for InputSkeleton {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.local_user_id == 0 || self.local_user_id > MAX_USER_LABEL {
            out.push(Violation::new("local_user_id outside [1, 15]"));
        }
        joint_set_violations(&self.joints, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackState {
    Pending,
    Confirmed,
    Lost,
}

impl fmt::Display for TrackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackState::Pending => "pending",
            TrackState::Confirmed => "confirmed",
            TrackState::Lost => "lost",
        })
    }
}

/// Fixed-capacity FIFO of (frame index, center of mass); the oldest entry is
/// evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComHistory {
    capacity: usize,
    entries: VecDeque<(u64, Vec3)>,
}

impl ComHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be positive");
        ComHistory {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, frame: u64, com: Vec3) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((frame, com));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn newest(&self) -> Option<&(u64, Vec3)> {
        self.entries.back()
    }

    pub fn oldest(&self) -> Option<&(u64, Vec3)> {
        self.entries.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u64, Vec3)> {
        self.entries.iter()
    }

    /// Meters per frame, oldest to newest. Zero with fewer than two entries.
    pub fn velocity(&self) -> Vec3 {
        match (self.entries.front(), self.entries.back()) {
            (Some(&(f0, c0)), Some(&(f1, c1))) if f1 > f0 => (c1 - c0) / (f1 - f0) as f64,
            _ => Vec3::zeros(),
        }
    }
}

/// A fused, labeled, tracked skeleton in the common frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSkeleton {
    pub output_id: u32,
    pub label: String,
    pub joints: JointSet,
    pub contributors: Vec<(u16, u8)>,
    pub state: TrackState,
    pub com_history: ComHistory,
    pub velocity: Vec3,
    pub lost_age: u32,
}

impl OutputSkeleton {
    pub fn center_of_mass(&self) -> Vec3 {
        self.com_history
            .newest()
            .map(|&(_, c)| c)
            .unwrap_or_else(|| center_of_mass(&self.joints))
    }
}

impl Validate for OutputSkeleton {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.state != TrackState::Lost && self.contributors.is_empty() {
            out.push(Violation::new("active output without contributors"));
        }
        joint_set_violations(&self.joints, &mut out);
        if (self.velocity - self.com_history.velocity()).norm() > 1e-12 {
            out.push(Violation::new("velocity stale relative to com history"));
        }
        out
    }
}

/// Points in meters with optional per-point color.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        PointCloud {
            positions,
            colors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            positions: self.positions.iter().map(|p| t.apply(p)).collect(),
            colors: self.colors.clone(),
        }
    }
}

impl Validate for PointCloud {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self
            .positions
            .iter()
            .any(|p| !p.iter().all(|c| c.is_finite()))
        {
            out.push(Violation::new("non-finite point coordinate"));
        }
        if let Some(c) = &self.colors {
            if c.len() != self.positions.len() {
                out.push(Violation::new("color count != point count"));
            }
        }
        out
    }
}

/// `p_common = rotation * p_camera + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle_rad: f64, translation: Vec3) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle_rad);
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Geodesic angle between the two rotations, radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        // acos loses precision near zero; recover small angles from the skew part.
        let s = Vec3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm()
            / 2.0;
        s.atan2(c)
    }

    /// Row-major `[R | t]`, twelve numbers.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn from_row_major(v: &[f64; 12]) -> Self {
        RigidTransform {
            rotation: Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]),
            translation: Vec3::new(v[3], v[7], v[11]),
        }
    }
}

impl Validate for RigidTransform {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.rotation.iter().chain(self.translation.iter()).all(|c| c.is_finite()) {
            out.push(Violation::new("non-finite transform"));
            return out;
        }
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-6 {
            out.push(Violation::new("not orthonormal"));
        }
        if (self.rotation.determinant() - 1.0).abs() > 1e-6 {
            out.push(Violation::new("determinant != +1"));
        }
        out
    }
}
