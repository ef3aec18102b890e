use std::io::{BufRead, Write};

use super::camera::unproject_pixel;
use super::GeometryError;
use crate::model::{CameraIntrinsics, ColorFrame, DepthFrame, PointCloud, RigidTransform, Vec3};

/// Concatenates the clouds after moving each into the common frame.
/// Colors survive only if every input carries them.
pub fn fuse_clouds(clouds: &[(PointCloud, RigidTransform)]) -> PointCloud {
    let total = clouds.iter().map(|(c, _)| c.len()).sum();
    let mut positions = Vec::with_capacity(total);
    let keep_colors = !clouds.is_empty() && clouds.iter().all(|(c, _)| c.colors.is_some());
    let mut colors = keep_colors.then(|| Vec::with_capacity(total));
    for (cloud, t) in clouds {
        positions.extend(cloud.positions.iter().map(|p| t.apply(p)));
        if let (Some(out), Some(c)) = (colors.as_mut(), &cloud.colors) {
            out.extend_from_slice(c);
        }
    }
    PointCloud { positions, colors }
}

/// Unprojects one pixel out of every `factor` (= k²) in row-major order,
/// skipping holes. A hole-free `w x h` frame yields `ceil(w*h / k²)` points.
pub fn subsample(
    depth: &DepthFrame,
    intrinsics: &CameraIntrinsics,
    k: usize,
    color: Option<&ColorFrame>,
) -> Result<PointCloud, GeometryError> {
    if !(1..=4).contains(&k) {
        return Err(GeometryError::InvalidInput(format!(
            "subsample k must be in 1..=4, got {k}"
        )));
    }
    let intr = intrinsics.with_resolution(depth.width, depth.height);
    let color = color.filter(|c| c.width == depth.width && c.height == depth.height);
    let mut positions = Vec::new();
    let mut colors = color.map(|_| Vec::new());
    for i in (0..depth.data.len()).step_by(k * k) {
        let d = depth.data[i];
        if d == 0 {
            continue;
        }
        positions.push(unproject_pixel(&intr, i % depth.width, i / depth.width, d));
        if let (Some(out), Some(c)) = (colors.as_mut(), color) {
            out.push(c.data[i]);
        }
    }
    Ok(PointCloud { positions, colors })
}

const DEFAULT_PLY_COLOR: [u8; 3] = [200, 200, 200];

/// ASCII PLY with `x y z red green blue` per vertex.
pub fn write_ply<W: Write>(mut w: W, cloud: &PointCloud) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    for ch in ["red", "green", "blue"] {
        writeln!(w, "property uchar {ch}")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.positions.iter().enumerate() {
        let c = cloud
            .colors
            .as_ref()
            .map_or(DEFAULT_PLY_COLOR, |c| c[i]);
        writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
    }
    Ok(())
}

/// Reads ASCII PLY files with `x y z` and optional `red green blue`
/// vertex properties.
pub fn read_ply<R: BufRead>(r: R) -> Result<PointCloud, GeometryError> {
    let mut lines = r.lines();
    let mut next = || -> Result<String, GeometryError> {
        lines
            .next()
            .ok_or_else(|| GeometryError::Parse("unexpected end of PLY".into()))?
            .map_err(GeometryError::from)
    };
    if next()?.trim() != "ply" {
        return Err(GeometryError::Parse("missing ply magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = next()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(GeometryError::Parse(format!("unsupported PLY format {other}")))
            }
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|e| GeometryError::Parse(e.to_string()))?,
                )
            }
            ["property", _, name] => props.push(name.to_string()),
            _ => {}
        }
    }
    let count = count.ok_or_else(|| GeometryError::Parse("no vertex element".into()))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(GeometryError::Parse("missing x/y/z properties".into())),
    };
    let rgb = match (col("red"), col("green"), col("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let mut positions = Vec::with_capacity(count);
    let mut colors = rgb.map(|_| Vec::with_capacity(count));
    for _ in 0..count {
        let line = next()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < props.len() {
            return Err(GeometryError::Parse(format!("short vertex line: {line}")));
        }
        let num = |i: usize| -> Result<f64, GeometryError> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| GeometryError::Parse(e.to_string()))
        };
        positions.push(Vec3::new(num(xi)?, num(yi)?, num(zi)?));
        if let (Some(out), Some(idx)) = (colors.as_mut(), rgb) {
            let mut c = [0u8; 3];
            for (k, &i) in idx.iter().enumerate() {
                c[k] = fields[i]
                    .parse::<u8>()
                    .map_err(|e| GeometryError::Parse(e.to_string()))?;
            }
            out.push(c);
        }
    }
    Ok(PointCloud { positions, colors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_single_identity_is_identity() {
        let c = PointCloud::from_positions(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 0.0, 1.0)]);
        let f = fuse_clouds(&[(c.clone(), RigidTransform::identity())]);
        assert_eq!(f, c);
    }

    #[test]
    fn fuse_counts_add() {
        let a = PointCloud::from_positions(vec![Vec3::zeros(); 100]);
        let b = PointCloud::from_positions(vec![Vec3::new(5.0, 0.0, 0.0); 100]);
        let f = fuse_clouds(&[(a, RigidTransform::identity()), (b, RigidTransform::identity())]);
        assert_eq!(f.len(), 200);
    }

    #[test]
    fn subsample_rejects_bad_factor() {
        let d = DepthFrame::zeros(4, 4);
        assert!(subsample(&d, &CameraIntrinsics::default(), 5, None).is_err());
        assert!(subsample(&d, &CameraIntrinsics::default(), 0, None).is_err());
    }

    #[test]
    fn ply_round_trip() {
        let cloud = PointCloud {
            positions: vec![Vec3::new(0.1, -2.5, 3.0), Vec3::new(1e-3, 0.0, 7.25)],
            colors: Some(vec![[1, 2, 3], [255, 0, 9]]),
        };
        let mut buf = Vec::new();
        write_ply(&mut buf, &cloud).unwrap();
        let back = read_ply(buf.as_slice()).unwrap();
        assert_eq!(back, cloud);
    }
}
