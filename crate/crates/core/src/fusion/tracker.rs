use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matching::{average_joints, match_candidates, paired_com_distance, track_center, velocity_conditions, Motion};
use super::{FusionError, FusionParams};
use crate::geometry::{Side, SideLink};
use crate::model::{
    ComHistory, InputSkeleton, JointSet, OutputSkeleton, RigidTransform, TrackState, Vec3,
};

type InputKey = (u16, u8);

/// True when leaving `exit` and entering `entry` describe one continuous walk.
/// Besides the configured links, leaving a camera and re-entering it on the
/// same side always corresponds.
pub fn sides_correspond(links: &[SideLink], exit: (u16, Side), entry: (u16, Side)) -> bool {
    exit == entry || links.iter().any(|l| l.connects(exit, entry))
}

/// A lost output as seen by the handoff test.
#[derive(Debug, Clone)]
pub struct LostTrack<'a> {
    pub output_id: u32,
    /// Joints extrapolated to the moment the new input was first seen.
    pub joints: JointSet,
    pub motion: Motion,
    /// Cameras and image sides through which its last contributors left.
    pub exits: &'a [(u16, Side)],
}

/// An unlinked input considered for a handoff.
#[derive(Debug, Clone)]
pub struct NewInput<'a> {
    pub camera_id: u16,
    /// Joints where it was first seen, in the common frame.
    pub joints: &'a JointSet,
    pub entry_side: Side,
    pub motion: Motion,
}

/// Picks the lost output the new input continues, if any: the extrapolated
/// position must be within the distance gate, the velocity conditions must
/// hold, and the exit side must correspond to the entry side. The nearest of
/// several qualifying outputs wins.
pub fn handoff(lost: &[LostTrack<'_>], input: &NewInput<'_>, links: &[SideLink], params: &FusionParams) -> Option<u32> {
    lost.iter()
        .filter_map(|l| {
            let d = paired_com_distance(&l.joints, input.joints, params.joint_confidence_floor);
            if d >= params.com_distance_threshold {
                return None;
            }
            let (_, angle_ok, magnitude_ok) = velocity_conditions(l.motion, input.motion, params);
            if !(angle_ok && magnitude_ok) {
                return None;
            }
            let side_ok = l
                .exits
                .iter()
                .any(|&exit| sides_correspond(links, exit, (input.camera_id, input.entry_side)));
            side_ok.then_some((d, l.output_id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// One line of the tracker trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame: u64,
    pub output_id: u32,
    pub state: TrackState,
    pub label: String,
    pub com: [f64; 3],
    pub contributors: usize,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace record serializes")
    }
}

#[derive(Debug, Clone)]
struct InputTrack {
    history: ComHistory,
    joints: JointSet,
    side: Side,
    first_side: Side,
    /// Frame and joints at which a handoff was first considered.
    probe_frame: u64,
    probe_joints: JointSet,
    /// Lost output this input may continue, decided once settled.
    handoff_wait: Option<u32>,
    handoff_checked: bool,
}

impl InputTrack {
    fn motion(&self) -> Motion {
        Motion {
            velocity: self.history.velocity(),
            samples: self.history.len(),
        }
    }
}

#[derive(Debug, Clone)]
struct OutputTrack {
    skel: OutputSkeleton,
    active_frames: u32,
    last_active_frame: u64,
    /// Joints at the last active frame, the base for extrapolation.
    last_joints: JointSet,
    exits: Vec<(u16, Side)>,
}

impl OutputTrack {
    fn motion(&self) -> Motion {
        Motion {
            velocity: self.skel.com_history.velocity(),
            samples: self.skel.com_history.len(),
        }
    }

    fn extrapolated(&self, frame: u64) -> JointSet {
        let shift = self.skel.velocity * frame.saturating_sub(self.last_active_frame) as f64;
        let mut joints = self.last_joints;
        for j in joints.iter_mut() {
            j.position += shift;
        }
        joints
    }
}

/// The skeleton-merging state machine. Feed it one batch of inputs per frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: FusionParams,
    side_links: Vec<SideLink>,
    frame: u64,
    next_id: u32,
    outputs: BTreeMap<u32, OutputTrack>,
    links: BTreeMap<InputKey, u32>,
    inputs: BTreeMap<InputKey, InputTrack>,
    pending_matches: BTreeMap<(InputKey, u32), u32>,
    pending_merges: BTreeMap<(u32, u32), u32>,
    trace: Vec<TraceRecord>,
}

impl Tracker {
    pub fn new(params: FusionParams) -> Result<Tracker, FusionError> {
        params.check()?;
        Ok(Tracker {
            params,
            side_links: Vec::new(),
            frame: 0,
            next_id: 1,
            outputs: BTreeMap::new(),
            links: BTreeMap::new(),
            inputs: BTreeMap::new(),
            pending_matches: BTreeMap::new(),
            pending_merges: BTreeMap::new(),
            trace: Vec::new(),
        })
    }

    pub fn with_side_links(mut self, links: Vec<SideLink>) -> Tracker {
        self.side_links = links;
        self
    }

    pub fn params(&self) -> &FusionParams {
        &self.params
    }

    /// Index the next batch will get.
    pub fn frame_index(&self) -> u64 {
        self.frame
    }

    pub fn link_table(&self) -> &BTreeMap<(u16, u8), u32> {
        &self.links
    }

    pub fn outputs(&self) -> impl Iterator<Item = &OutputSkeleton> {
        self.outputs.values().map(|o| &o.skel)
    }

    pub fn output(&self, id: u32) -> Option<&OutputSkeleton> {
        self.outputs.get(&id).map(|o| &o.skel)
    }

    pub fn confirmed(&self) -> Vec<&OutputSkeleton> {
        self.outputs()
            .filter(|o| o.state == TrackState::Confirmed)
            .collect()
    }

    /// Replaces an output's label. Returns false for unknown ids.
    pub fn set_label(&mut self, output_id: u32, label: impl Into<String>) -> bool {
        match self.outputs.get_mut(&output_id) {
            Some(o) => {
                o.skel.label = label.into();
                true
            }
            None => false,
        }
    }

    /// Trace records of the most recent frame.
    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Processes one frame of inputs, each in its own camera frame, and
    /// returns every output after the update, ordered by id.
    pub fn ingest_frame(
        &mut self,
        inputs: &[InputSkeleton],
        calib: &BTreeMap<u16, RigidTransform>,
    ) -> Result<Vec<OutputSkeleton>, FusionError> {
        for s in inputs {
            if !calib.contains_key(&s.camera_id) {
                return Err(FusionError::MissingCalibration(s.camera_id));
            }
        }
        let frame = self.frame;
        self.frame += 1;

        // Common frame, one input per (camera, local id).
        let mut present: BTreeMap<InputKey, (JointSet, Side)> = BTreeMap::new();
        for s in inputs {
            let side = Side::of_camera_x(track_center(&s.joints).x);
            let world = s.transformed(&calib[&s.camera_id]).joints;
            present.entry((s.camera_id, s.local_user_id)).or_insert((world, side));
        }
        self.update_input_tracks(frame, &present);

        // Existing links: drop the absent, remember how they left.
        let mut departed: BTreeMap<u32, Vec<(u16, Side)>> = BTreeMap::new();
        let mut gone = Vec::new();
        for (&key, &id) in &self.links {
            if !present.contains_key(&key) {
                gone.push(key);
                departed.entry(id).or_default().push((key.0, self.previous_side(key)));
            }
        }
        for key in gone {
            self.links.remove(&key);
        }
        self.inputs.retain(|k, _| present.contains_key(k));

        // Provisional joints for outputs that still have contributors.
        let mut active: BTreeMap<u32, JointSet> = BTreeMap::new();
        for id in self.outputs.keys().copied().collect::<Vec<_>>() {
            if let Some(j) = self.fused_joints(id) {
                active.insert(id, j);
            }
        }

        self.match_unlinked(&mut active);
        self.spawn_or_handoff(frame, &mut active);
        self.settle_outputs(frame, &departed);
        self.merge_duplicates(frame);
        self.record_trace(frame);
        Ok(self.outputs().cloned().collect())
    }

    fn update_input_tracks(&mut self, frame: u64, present: &BTreeMap<InputKey, (JointSet, Side)>) {
        for (key, (joints, side)) in present {
            let com = track_center(joints);
            match self.inputs.get_mut(key) {
                Some(t) => {
                    t.history.push(frame, com);
                    t.joints = *joints;
                    t.side = *side;
                }
                None => {
                    let mut history = ComHistory::new(self.params.history_capacity);
                    history.push(frame, com);
                    self.inputs.insert(
                        *key,
                        InputTrack {
                            history,
                            joints: *joints,
                            side: *side,
                            first_side: *side,
                            probe_frame: frame,
                            probe_joints: *joints,
                            handoff_wait: None,
                            handoff_checked: false,
                        },
                    );
                }
            }
        }
    }

    /// Image side of the input as of its last frame. Called before absent
    /// inputs are forgotten, so the stored side is the previous frame's.
    fn previous_side(&self, key: InputKey) -> Side {
        self.inputs.get(&key).map_or(Side::Right, |t| t.side)
    }

    fn contributors_of(&self, id: u32) -> Vec<InputKey> {
        self.links
            .iter()
            .filter(|(_, &o)| o == id)
            .map(|(&k, _)| k)
            .collect()
    }

    fn fused_joints(&self, id: u32) -> Option<JointSet> {
        let sets: Vec<&JointSet> = self
            .contributors_of(id)
            .iter()
            .filter_map(|k| self.inputs.get(k).map(|t| &t.joints))
            .collect();
        (!sets.is_empty()).then(|| average_joints(&sets, self.params.joint_confidence_floor))
    }

    fn output_has_camera(&self, id: u32, camera: u16) -> bool {
        self.links.iter().any(|(k, &o)| o == id && k.0 == camera)
    }

    /// Merge conditions of unlinked inputs against active outputs; a pair
    /// that holds for the confirmation window links the input.
    fn match_unlinked(&mut self, active: &mut BTreeMap<u32, JointSet>) {
        let unlinked: Vec<InputKey> = self
            .inputs
            .keys()
            .filter(|k| !self.links.contains_key(k))
            .copied()
            .collect();
        // Best satisfied output per input, nearest first.
        let mut best: BTreeMap<InputKey, (u32, f64)> = BTreeMap::new();
        for &key in &unlinked {
            let track = &self.inputs[&key];
            let mut choice: Option<(u32, f64)> = None;
            for (&id, joints) in active.iter() {
                if self.output_has_camera(id, key.0) {
                    continue;
                }
                let report = match_candidates(joints, self.outputs[&id].motion(), &track.joints, track.motion(), &self.params);
                if report.satisfied() && choice.is_none_or(|(_, d)| report.com_distance < d) {
                    choice = Some((id, report.com_distance));
                }
            }
            if let Some(c) = choice {
                best.insert(key, c);
            }
        }
        // One input per camera per output: the nearest.
        let mut winners: BTreeMap<(u32, u16), (InputKey, f64)> = BTreeMap::new();
        for (&key, &(id, d)) in &best {
            let slot = winners.entry((id, key.0)).or_insert((key, d));
            if d < slot.1 {
                *slot = (key, d);
            }
        }
        let mut counters = BTreeMap::new();
        for (&(id, _), &(key, _)) in &winners {
            let n = self.pending_matches.get(&(key, id)).copied().unwrap_or(0) + 1;
            if n >= self.params.confirmation_window {
                self.links.insert(key, id);
                if let Some(t) = self.inputs.get_mut(&key) {
                    t.handoff_wait = None;
                }
            } else {
                counters.insert((key, id), n);
            }
        }
        self.pending_matches = counters;
        for id in active.keys().copied().collect::<Vec<_>>() {
            if let Some(j) = self.fused_joints(id) {
                active.insert(id, j);
            }
        }
    }

    /// Inputs still unlinked either wait (near an active output, or for a
    /// handoff decision), continue a lost output, or start a new one.
    fn spawn_or_handoff(&mut self, frame: u64, active: &mut BTreeMap<u32, JointSet>) {
        let unlinked: Vec<InputKey> = self
            .inputs
            .keys()
            .filter(|k| !self.links.contains_key(k))
            .copied()
            .collect();
        let floor = self.params.joint_confidence_floor;
        let gate = self.params.com_distance_threshold;
        for key in unlinked {
            let joints = self.inputs[&key].joints;
            let near_active = active.iter().any(|(&id, j)| {
                !self.output_has_camera(id, key.0) && paired_com_distance(j, &joints, floor) < gate
            });
            if near_active {
                continue;
            }
            match self.decide_handoff(key, frame) {
                HandoffStep::Wait => continue,
                HandoffStep::Continue(id) => {
                    self.links.insert(key, id);
                    if let Some(j) = self.fused_joints(id) {
                        active.insert(id, j);
                    }
                }
                HandoffStep::Spawn => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.links.insert(key, id);
                    let skel = OutputSkeleton {
                        output_id: id,
                        label: format!("P{id}"),
                        joints,
                        contributors: vec![key],
                        state: TrackState::Pending,
                        com_history: ComHistory::new(self.params.history_capacity),
                        velocity: Vec3::zeros(),
                        lost_age: 0,
                    };
                    self.outputs.insert(
                        id,
                        OutputTrack {
                            skel,
                            active_frames: 0,
                            last_active_frame: frame,
                            last_joints: joints,
                            exits: Vec::new(),
                        },
                    );
                    active.insert(id, joints);
                }
            }
        }
    }

    fn lost_view(&self, id: u32, at_frame: u64) -> Option<LostTrack<'_>> {
        let o = self.outputs.get(&id)?;
        (o.skel.state == TrackState::Lost).then(|| LostTrack {
            output_id: id,
            joints: o.extrapolated(at_frame),
            motion: o.motion(),
            exits: &o.exits,
        })
    }

    fn decide_handoff(&mut self, key: InputKey, frame: u64) -> HandoffStep {
        if !self.inputs[&key].handoff_checked {
            // Position and side are judged where the input is first
            // considered; velocity waits until it can be measured.
            let track = &self.inputs[&key];
            let probe = NewInput {
                camera_id: key.0,
                joints: &track.joints,
                entry_side: track.first_side,
                motion: Motion {
                    velocity: Vec3::zeros(),
                    samples: 0,
                },
            };
            let lost: Vec<LostTrack> = self
                .outputs
                .keys()
                .filter_map(|&id| self.lost_view(id, frame))
                .collect();
            let candidate = handoff(&lost, &probe, &self.side_links, &self.params);
            let t = self.inputs.get_mut(&key).expect("tracked");
            t.handoff_checked = true;
            t.handoff_wait = candidate;
            t.probe_frame = frame;
            t.probe_joints = t.joints;
        }
        let track = &self.inputs[&key];
        let Some(id) = track.handoff_wait else {
            return HandoffStep::Spawn;
        };
        let Some(lost) = self.lost_view(id, track.probe_frame) else {
            self.inputs.get_mut(&key).expect("tracked").handoff_wait = None;
            return HandoffStep::Spawn;
        };
        if track.history.len() < self.params.handoff_settle_frames {
            return HandoffStep::Wait;
        }
        let entry = NewInput {
            camera_id: key.0,
            joints: &track.probe_joints,
            entry_side: track.first_side,
            motion: track.motion(),
        };
        let decision = handoff(&[lost], &entry, &self.side_links, &self.params);
        self.inputs.get_mut(&key).expect("tracked").handoff_wait = None;
        match decision {
            Some(id) => HandoffStep::Continue(id),
            None => HandoffStep::Spawn,
        }
    }

    /// Applies this frame's contributors: refreshes active outputs, ages and
    /// extrapolates lost ones, deletes expired ones.
    fn settle_outputs(&mut self, frame: u64, departed: &BTreeMap<u32, Vec<(u16, Side)>>) {
        let window = self.params.confirmation_window;
        let retention = self.params.lost_retention;
        let ids: Vec<u32> = self.outputs.keys().copied().collect();
        for id in ids {
            let contributors = self.contributors_of(id);
            let fused = self.fused_joints(id);
            let o = self.outputs.get_mut(&id).expect("listed");
            if let Some(joints) = fused {
                o.skel.joints = joints;
                o.skel.contributors = contributors;
                o.skel.com_history.push(frame, track_center(&joints));
                o.skel.velocity = o.skel.com_history.velocity();
                o.skel.lost_age = 0;
                o.active_frames += 1;
                o.last_active_frame = frame;
                o.last_joints = joints;
                o.exits.clear();
                o.skel.state = if o.skel.state == TrackState::Pending && o.active_frames < window {
                    TrackState::Pending
                } else {
                    TrackState::Confirmed
                };
                continue;
            }
            o.skel.contributors.clear();
            match o.skel.state {
                TrackState::Pending => {
                    self.outputs.remove(&id);
                    continue;
                }
                TrackState::Confirmed => {
                    o.skel.state = TrackState::Lost;
                    o.exits = departed.get(&id).cloned().unwrap_or_default();
                }
                TrackState::Lost => {}
            }
            o.skel.lost_age += 1;
            // A reappearance probed in time holds the output until decided.
            let awaited = self.inputs.values().any(|t| t.handoff_wait == Some(id));
            if o.skel.lost_age > retention && !awaited {
                self.outputs.remove(&id);
                continue;
            }
            o.skel.joints = o.extrapolated(frame);
        }
        let live: BTreeSet<u32> = self.outputs.keys().copied().collect();
        self.pending_matches.retain(|(_, id), _| live.contains(id));
        for t in self.inputs.values_mut() {
            if t.handoff_wait.is_some_and(|id| !live.contains(&id)) {
                t.handoff_wait = None;
            }
        }
    }

    /// Two active outputs satisfying the merge conditions for the
    /// confirmation window describe one person: the younger joins the older.
    fn merge_duplicates(&mut self, frame: u64) {
        let active: Vec<u32> = self
            .outputs
            .iter()
            .filter(|(_, o)| o.skel.state != TrackState::Lost)
            .map(|(&id, _)| id)
            .collect();
        let mut counters = BTreeMap::new();
        let mut merges = Vec::new();
        for (i, &a) in active.iter().enumerate() {
            for &b in &active[i + 1..] {
                let cams_a: BTreeSet<u16> = self.outputs[&a].skel.contributors.iter().map(|k| k.0).collect();
                if self.outputs[&b].skel.contributors.iter().any(|k| cams_a.contains(&k.0)) {
                    continue;
                }
                let (oa, ob) = (&self.outputs[&a], &self.outputs[&b]);
                let report = match_candidates(&oa.skel.joints, oa.motion(), &ob.skel.joints, ob.motion(), &self.params);
                if !report.satisfied() {
                    continue;
                }
                let n = self.pending_merges.get(&(a, b)).copied().unwrap_or(0) + 1;
                if n >= self.params.confirmation_window {
                    merges.push((a, b));
                } else {
                    counters.insert((a, b), n);
                }
            }
        }
        self.pending_merges = counters;
        let mut absorbed = BTreeSet::new();
        for (older, younger) in merges {
            if absorbed.contains(&older) || absorbed.contains(&younger) {
                continue;
            }
            absorbed.insert(younger);
            for id in self.links.values_mut() {
                if *id == younger {
                    *id = older;
                }
            }
            let young = self.outputs.remove(&younger).expect("active");
            let joints = self.fused_joints(older).expect("merged output has contributors");
            let contributors = self.contributors_of(older);
            let o = self.outputs.get_mut(&older).expect("active");
            if young.skel.state == TrackState::Confirmed {
                o.skel.state = TrackState::Confirmed;
            }
            o.skel.joints = joints;
            o.skel.contributors = contributors;
            o.last_joints = joints;
            // Replace this frame's sample with the merged center.
            let mut history = ComHistory::new(o.skel.com_history.capacity());
            for &(f, c) in o.skel.com_history.iter().filter(|(f, _)| *f != frame) {
                history.push(f, c);
            }
            history.push(frame, track_center(&joints));
            o.skel.com_history = history;
            o.skel.velocity = o.skel.com_history.velocity();
        }
        self.pending_matches.retain(|(_, id), _| !absorbed.contains(id));
    }

    fn record_trace(&mut self, frame: u64) {
        self.trace = self
            .outputs
            .values()
            .map(|o| {
                let com = track_center(&o.skel.joints);
                TraceRecord {
                    frame,
                    output_id: o.skel.output_id,
                    state: o.skel.state,
                    label: o.skel.label.clone(),
                    com: [com.x, com.y, com.z],
                    contributors: o.skel.contributors.len(),
                }
            })
            .collect();
    }
}

enum HandoffStep {
    Wait,
    Continue(u32),
    Spawn,
}
