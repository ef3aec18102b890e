use super::kdtree::KdTree;
use super::rigid::fit_rigid_points;
use super::GeometryError;
use crate::model::{PointCloud, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iters: usize,
    /// Stop once an iteration improves the pairing RMS by less than this (m).
    pub tolerance: f64,
    /// Pairs farther apart than this are rejected as outliers (m).
    pub max_pair_distance: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iters: 50,
            tolerance: 1e-7,
            max_pair_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome {
    pub transform: RigidTransform,
    /// Pairing RMS of the initial transform followed by every accepted step.
    /// Non-increasing by construction.
    pub rms_trace: Vec<f64>,
    pub iterations: usize,
}

impl IcpOutcome {
    pub fn final_rms(&self) -> f64 {
        *self.rms_trace.last().expect("trace holds the initial rms")
    }
}

struct Pairing {
    rms: f64,
    source: Vec<Vec3>,
    target: Vec<Vec3>,
}

fn pair(source: &[Vec3], tree: &KdTree, t: &RigidTransform, cutoff: f64) -> Pairing {
    let cutoff2 = cutoff * cutoff;
    let mut sum = 0.0;
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for p in source {
        let moved = t.apply(p);
        if let Some((idx, d2)) = tree.nearest(&moved) {
            if d2 <= cutoff2 {
                sum += d2;
                src.push(moved);
                tgt.push(*tree.point(idx));
            }
        }
    }
    let rms = if src.is_empty() {
        f64::INFINITY
    } else {
        (sum / src.len() as f64).sqrt()
    };
    Pairing {
        rms,
        source: src,
        target: tgt,
    }
}

/// Point-to-point ICP: pair every transformed source point with its nearest
/// target point, re-fit a rigid increment on the pairs and compose it. A step
/// is only accepted if it lowers the pairing RMS, so the result is never
/// worse than `initial`.
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpOutcome, GeometryError> {
    if source.is_empty() || target.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let tree = KdTree::new(&target.positions);
    let mut current = *initial;
    let mut pairing = pair(&source.positions, &tree, &current, params.max_pair_distance);
    if pairing.source.is_empty() {
        return Err(GeometryError::NoOverlap(params.max_pair_distance));
    }
    let mut trace = vec![pairing.rms];
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let step = match fit_rigid_points(&pairing.source, &pairing.target) {
            Ok(s) => s,
            Err(_) => break,
        };
        let candidate = step.compose(&current);
        let next = pair(&source.positions, &tree, &candidate, params.max_pair_distance);
        if !(next.rms <= pairing.rms) || next.source.len() < 3 {
            break;
        }
        let gain = pairing.rms - next.rms;
        current = candidate;
        pairing = next;
        trace.push(pairing.rms);
        if gain < params.tolerance {
            break;
        }
    }
    Ok(IcpOutcome {
        transform: current,
        rms_trace: trace,
        iterations,
    })
}
