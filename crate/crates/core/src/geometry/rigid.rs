use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::model::{RigidTransform, Vec3};

/// A point seen by the camera under calibration (`a`) and the same point
/// seen by the reference camera (`b`), meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Correspondence {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Correspondence {
            a: [a.x, a.y, a.z],
            b: [b.x, b.y, b.z],
        }
    }

    pub fn point_a(&self) -> Vec3 {
        Vec3::from(self.a)
    }

    pub fn point_b(&self) -> Vec3 {
        Vec3::from(self.b)
    }
}

/// Relative size of the second principal extent below which the `a` points
/// count as collinear.
const COLLINEAR_RATIO: f64 = 1e-9;

/// Least-squares rigid transform minimizing `Σ |R a_i + t - b_i|²`.
///
/// Solved through the SVD of the cross-covariance; the smallest singular
/// direction is flipped when needed so that `det R = +1`.
pub fn fit_rigid(pairs: &[Correspondence]) -> Result<RigidTransform, GeometryError> {
    let a: Vec<Vec3> = pairs.iter().map(|c| c.point_a()).collect();
    let b: Vec<Vec3> = pairs.iter().map(|c| c.point_b()).collect();
    fit_rigid_points(&a, &b)
}

pub(crate) fn fit_rigid_points(a: &[Vec3], b: &[Vec3]) -> Result<RigidTransform, GeometryError> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 3 {
        return Err(GeometryError::TooFewCorrespondences(n));
    }
    if !a.iter().chain(b).all(|p| p.iter().all(|c| c.is_finite())) {
        return Err(GeometryError::InvalidInput("non-finite coordinate".into()));
    }
    let ca = a.iter().sum::<Vec3>() / n as f64;
    let cb = b.iter().sum::<Vec3>() / n as f64;

    let mut spread = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (pa, pb) in a.iter().zip(b) {
        let da = pa - ca;
        spread += da * da.transpose();
        cross += da * (pb - cb).transpose();
    }
    let extents = spread.symmetric_eigenvalues();
    let mut ext: Vec<f64> = extents.iter().copied().collect();
    ext.sort_by(|x, y| y.total_cmp(x));
    if ext[0] <= f64::MIN_POSITIVE || ext[1] <= COLLINEAR_RATIO * ext[0] {
        return Err(GeometryError::Degenerate);
    }

    let svd = SVD::new(cross, true, true);
    let u = svd.u.ok_or(GeometryError::Degenerate)?;
    let v_t = svd.v_t.ok_or(GeometryError::Degenerate)?;
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // nalgebra sorts singular values descending; the last one is smallest.
        fix[(2, 2)] = -1.0;
    }
    let rotation = v * fix * u.transpose();
    let translation = cb - rotation * ca;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Root-mean-square of `|T a_i - b_i|`.
pub fn rms_error(t: &RigidTransform, pairs: &[Correspondence]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|c| (t.apply(&c.point_a()) - c.point_b()).norm_squared())
        .sum();
    (sum / pairs.len() as f64).sqrt()
}
