use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::rigid::Correspondence;
use super::GeometryError;
use crate::model::RigidTransform;

const HEADER: &str = "depthgrid-calibration 1";

/// Per-camera transforms into the reference camera's frame.
///
/// Text layout:
/// ```text
/// depthgrid-calibration 1
/// reference 0
/// camera 0 1 0 0 0 0 1 0 0 0 0 1 0
/// camera 1 r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationSet {
    pub reference: u16,
    pub transforms: BTreeMap<u16, RigidTransform>,
}

impl CalibrationSet {
    pub fn new(reference: u16) -> Self {
        let mut transforms = BTreeMap::new();
        transforms.insert(reference, RigidTransform::identity());
        CalibrationSet {
            reference,
            transforms,
        }
    }

    pub fn get(&self, camera: u16) -> Option<&RigidTransform> {
        self.transforms.get(&camera)
    }

    pub fn insert(&mut self, camera: u16, t: RigidTransform) {
        self.transforms.insert(camera, t);
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HEADER}")?;
        writeln!(w, "reference {}", self.reference)?;
        for (id, t) in &self.transforms {
            write!(w, "camera {id}")?;
            for v in t.to_row_major() {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, GeometryError> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .filter(|l| !matches!(l, Ok((_, s)) if s.trim().is_empty() || s.trim_start().starts_with('#')));
        let bad = |line: usize, msg: &str| GeometryError::Parse(format!("calibration line {line}: {msg}"));
        match lines.next().transpose()? {
            Some((_, h)) if h.trim() == HEADER => {}
            Some((n, _)) => return Err(bad(n, "missing header")),
            None => return Err(GeometryError::Parse("empty calibration file".into())),
        }
        let mut set = CalibrationSet::default();
        let mut reference = None;
        for line in lines {
            let (n, line) = line?;
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("reference") => {
                    let id = fields
                        .next()
                        .and_then(|s| s.parse::<u16>().ok())
                        .ok_or_else(|| bad(n, "bad reference id"))?;
                    reference = Some(id);
                }
                Some("camera") => {
                    let id = fields
                        .next()
                        .and_then(|s| s.parse::<u16>().ok())
                        .ok_or_else(|| bad(n, "bad camera id"))?;
                    let vals: Vec<f64> = fields
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| bad(n, &e.to_string()))?;
                    let arr: [f64; 12] = vals
                        .try_into()
                        .map_err(|_| bad(n, "expected 12 numbers"))?;
                    if set.transforms.insert(id, RigidTransform::from_row_major(&arr)).is_some() {
                        return Err(bad(n, "duplicate camera"));
                    }
                }
                _ => return Err(bad(n, "unknown directive")),
            }
        }
        set.reference = reference.ok_or_else(|| GeometryError::Parse("no reference line".into()))?;
        Ok(set)
    }

    pub fn from_text(s: &str) -> Result<Self, GeometryError> {
        Self::read(s.as_bytes())
    }
}

/// Parses a JSON array of `{"a": [x,y,z], "b": [x,y,z]}` objects (meters).
pub fn read_correspondences<R: Read>(r: R) -> Result<Vec<Correspondence>, GeometryError> {
    let pairs: Vec<Correspondence> =
        serde_json::from_reader(r).map_err(|e| GeometryError::Parse(e.to_string()))?;
    if pairs
        .iter()
        .any(|c| c.a.iter().chain(c.b.iter()).any(|v| !v.is_finite()))
    {
        return Err(GeometryError::InvalidInput("non-finite coordinate".into()));
    }
    Ok(pairs)
}
