use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::frames::is_keyframe;
use super::packet::SensorPacket;

/// A packet taken from a mailbox together with the keyframe it predicts
/// from (absent for keyframes themselves).
#[derive(Debug, Clone)]
pub struct TakenPacket {
    pub packet: Arc<SensorPacket>,
    pub keyframe: Option<Arc<SensorPacket>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CameraStats {
    pub received: u64,
    /// Packets replaced by a newer one before anybody took them.
    pub skipped: u64,
    pub taken: u64,
    pub bytes: u64,
    pub last_seq: Option<u32>,
    pub last_receive_us: Option<u64>,
}

#[derive(Debug, Default)]
struct Slot {
    latest: Option<TakenPacket>,
    fresh: bool,
    keyframe: Option<Arc<SensorPacket>>,
    stats: CameraStats,
}

/// One single-slot mailbox per camera. Producers overwrite, consumers take
/// the newest packet; nothing is decoded here.
#[derive(Debug, Default)]
pub struct Mailboxes {
    slots: Mutex<BTreeMap<u16, Slot>>,
}

impl Mailboxes {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn put(&self, packet: SensorPacket, wire_bytes: usize, now_us: u64) {
        let packet = Arc::new(packet);
        let mut slots = self.slots.lock().unwrap();
        let slot = slots.entry(packet.camera_id).or_default();
        let keyframe = if is_keyframe(&packet) {
            slot.keyframe = Some(packet.clone());
            None
        } else {
            slot.keyframe.clone()
        };
        if slot.fresh {
            slot.stats.skipped += 1;
        }
        slot.stats.received += 1;
        slot.stats.bytes += wire_bytes as u64;
        slot.stats.last_seq = Some(packet.seq);
        slot.stats.last_receive_us = Some(now_us);
        slot.latest = Some(TakenPacket { packet, keyframe });
        slot.fresh = true;
    }

    /// Drops the remembered keyframe after a reconnect; predicted packets
    /// need a new keyframe before they can be decoded.
    pub fn reset_camera(&self, camera_id: u16) {
        if let Some(slot) = self.slots.lock().unwrap().get_mut(&camera_id) {
            slot.keyframe = None;
        }
    }

    /// Newest packet for one camera, or `None` when nothing arrived since
    /// the previous take.
    pub fn take(&self, camera_id: u16) -> Option<TakenPacket> {
        let mut slots = self.slots.lock().unwrap();
        let slot = slots.get_mut(&camera_id)?;
        if !slot.fresh {
            return None;
        }
        slot.fresh = false;
        slot.stats.taken += 1;
        slot.latest.clone()
    }

    /// Takes the newest packet of every camera that has one, atomically.
    pub fn take_all(&self) -> BTreeMap<u16, TakenPacket> {
        let mut slots = self.slots.lock().unwrap();
        let mut out = BTreeMap::new();
        for (&cam, slot) in slots.iter_mut() {
            if slot.fresh {
                slot.fresh = false;
                slot.stats.taken += 1;
                if let Some(t) = slot.latest.clone() {
                    out.insert(cam, t);
                }
            }
        }
        out
    }

    pub fn stats(&self) -> BTreeMap<u16, CameraStats> {
        self.slots
            .lock()
            .unwrap()
            .iter()
            .map(|(&c, s)| (c, s.stats))
            .collect()
    }

    pub fn cameras(&self) -> Vec<u16> {
        self.slots.lock().unwrap().keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(cam: u16, seq: u32) -> SensorPacket {
        SensorPacket {
            camera_id: cam,
            seq,
            ..Default::default()
        }
    }

    #[test]
    fn newest_wins() {
        let m = Mailboxes::new();
        for s in 1..=5 {
            m.put(pkt(0, s), 18, 0);
        }
        assert_eq!(m.take(0).unwrap().packet.seq, 5);
        assert!(m.take(0).is_none());
        let st = m.stats()[&0];
        assert_eq!((st.received, st.skipped, st.taken), (5, 4, 1));
    }
}
