use nalgebra::{Quaternion, UnitQuaternion};

use super::NetError;
use crate::model::{InputSkeleton, Joint, JointKind, Vec3, JOINT_COUNT};

// Per skeleton: local user id, then per joint: kind, x, y, z, confidence as
// f64, an orientation flag and, when set, the quaternion (w, i, j, k).

pub fn encode_skeletons(skeletons: &[InputSkeleton]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + skeletons.len() * (1 + JOINT_COUNT * 34));
    out.push(skeletons.len().min(u8::MAX as usize) as u8);
    for s in skeletons.iter().take(u8::MAX as usize) {
        out.push(s.local_user_id);
        for j in &s.joints {
            out.push(j.kind as u8);
            for v in [j.position.x, j.position.y, j.position.z, j.confidence] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            match j.orientation {
                None => out.push(0),
                Some(q) => {
                    out.push(1);
                    for v in [q.w, q.i, q.j, q.k] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn u8(&mut self) -> Result<u8, NetError> {
        let v = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| NetError::Payload(format!("skeletons truncated at byte {}", self.pos)))?;
        self.pos += 1;
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64, NetError> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| NetError::Payload(format!("skeletons truncated at byte {}", self.pos)))?;
        self.pos += 8;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode_skeletons(bytes: &[u8], camera_id: u16) -> Result<Vec<InputSkeleton>, NetError> {
    let mut c = Cursor { bytes, pos: 0 };
    let count = c.u8()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let local_user_id = c.u8()?;
        let mut joints = Vec::with_capacity(JOINT_COUNT);
        for expected in JointKind::ALL {
            let kind = c.u8()?;
            if kind != expected as u8 {
                return Err(NetError::Payload(format!(
                    "joint kind {kind} where {} expected",
                    expected as u8
                )));
            }
            let position = Vec3::new(c.f64()?, c.f64()?, c.f64()?);
            let confidence = c.f64()?;
            let orientation = match c.u8()? {
                0 => None,
                1 => {
                    let (w, i, j, k) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
                    Some(UnitQuaternion::new_unchecked(Quaternion::new(w, i, j, k)))
                }
                f => return Err(NetError::Payload(format!("bad orientation flag {f}"))),
            };
            joints.push(Joint {
                kind: expected,
                position,
                confidence,
                orientation,
            });
        }
        out.push(InputSkeleton {
            camera_id,
            local_user_id,
            joints: joints.try_into().expect("15 joints"),
        });
    }
    if c.pos != bytes.len() {
        return Err(NetError::Payload(format!(
            "{} trailing bytes in skeleton section",
            bytes.len() - c.pos
        )));
    }
    Ok(out)
}
