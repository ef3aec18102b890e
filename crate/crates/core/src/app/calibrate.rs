use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use super::AppError;
use crate::geometry::{
    fit_rigid, icp_refine, read_correspondences, read_ply, rms_error, CalibrationSet, Correspondence,
    GeometryError, IcpParams,
};
use crate::model::{PointCloud, RigidTransform};

#[derive(Debug, Clone, Default)]
pub struct CalibrateOptions {
    pub reference: u16,
    /// Correspondence files per camera under calibration.
    pub correspondences: Vec<(u16, PathBuf)>,
    /// Raw clouds per camera; the reference camera's cloud is the ICP target.
    pub clouds: Vec<(u16, PathBuf)>,
    pub icp: IcpParams,
    /// Existing calibration to extend instead of starting from scratch.
    pub base: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFit {
    pub camera_id: u16,
    pub transform: RigidTransform,
    /// Correspondence residual RMS before and after refinement (m).
    pub fit_rms: Option<f64>,
    pub refined_rms: Option<f64>,
    /// Final ICP pairing RMS (m).
    pub icp_rms: f64,
    pub icp_iterations: usize,
}

impl CameraFit {
    pub fn report_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        format!(
            "camera {} fit_rms={} refined_rms={} icp_rms={:.6} icp_iterations={}",
            self.camera_id,
            opt(self.fit_rms),
            opt(self.refined_rms),
            self.icp_rms,
            self.icp_iterations
        )
    }
}

fn geometry_error(camera: u16, e: GeometryError) -> AppError {
    let msg = format!("camera {camera}: {e}");
    match e {
        GeometryError::Degenerate | GeometryError::NoOverlap(_) | GeometryError::EmptyCloud => AppError::Degenerate(msg),
        _ => AppError::Input(msg),
    }
}

fn open(path: &PathBuf) -> Result<File, AppError> {
    File::open(path).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

/// Fits every camera against the reference, then refines the fit with ICP
/// on the camera's raw cloud (or, without clouds, on the correspondence
/// points themselves).
pub fn run_calibrate(opts: &CalibrateOptions) -> Result<(CalibrationSet, Vec<CameraFit>), AppError> {
    let mut set = match &opts.base {
        Some(p) => CalibrationSet::read(BufReader::new(open(p)?)).map_err(|e| AppError::Input(format!("{}: {e}", p.display())))?,
        None => CalibrationSet::new(opts.reference),
    };
    if set.reference != opts.reference {
        return Err(AppError::Input(format!(
            "base calibration uses reference {}, not {}",
            set.reference, opts.reference
        )));
    }
    let mut clouds: BTreeMap<u16, PointCloud> = BTreeMap::new();
    for (cam, path) in &opts.clouds {
        let cloud = read_ply(BufReader::new(open(path)?)).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
        clouds.insert(*cam, cloud);
    }
    let mut pairs: BTreeMap<u16, Vec<Correspondence>> = BTreeMap::new();
    for (cam, path) in &opts.correspondences {
        let c = read_correspondences(open(path)?).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
        pairs.entry(*cam).or_default().extend(c);
    }
    let mut cameras: Vec<u16> = pairs.keys().chain(clouds.keys()).copied().filter(|&c| c != opts.reference).collect();
    cameras.dedup();
    cameras.sort_unstable();
    cameras.dedup();
    if cameras.is_empty() {
        return Err(AppError::Input("no camera to calibrate".into()));
    }
    let mut fits = Vec::new();
    for cam in cameras {
        let corr = pairs.get(&cam);
        let initial = match corr {
            Some(c) if c.len() < 3 => {
                return Err(AppError::Input(format!("camera {cam}: need at least 3 correspondences, got {}", c.len())))
            }
            Some(c) => fit_rigid(c).map_err(|e| geometry_error(cam, e))?,
            None => RigidTransform::identity(),
        };
        let (source, target) = match (clouds.get(&cam), clouds.get(&opts.reference), corr) {
            (Some(s), Some(t), _) => (s.clone(), t.clone()),
            (_, _, Some(c)) => (
                PointCloud::from_positions(c.iter().map(|p| p.point_a()).collect()),
                PointCloud::from_positions(c.iter().map(|p| p.point_b()).collect()),
            ),
            _ => {
                return Err(AppError::Input(format!(
                    "camera {cam}: a cloud needs the reference camera's cloud as well"
                )))
            }
        };
        let outcome = icp_refine(&source, &target, &initial, &opts.icp).map_err(|e| geometry_error(cam, e))?;
        let transform = outcome.transform;
        set.insert(cam, transform);
        fits.push(CameraFit {
            camera_id: cam,
            transform,
            fit_rms: corr.map(|c| rms_error(&initial, c)),
            refined_rms: corr.map(|c| rms_error(&transform, c)),
            icp_rms: outcome.final_rms(),
            icp_iterations: outcome.iterations,
        });
    }
    Ok((set, fits))
}
