//! Open-loop CPG gaits, fixed poses and keyframe timelines.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contact::smoothstep;
use crate::error::{Error, Result};
use crate::model::{JointAxis, JointVector, ScenarioName, NUM_JOINTS};

/// Joint limit in degrees, shared by every joint.
pub const JOINT_LIMIT_DEG: f64 = 90.0;
/// Latch engagement tolerances.
pub const ENGAGE_POSITION_TOL: f64 = 0.02;
pub const ENGAGE_ANGLE_TOL: f64 = 0.2;
/// Time over which a CPG segment blends in from the preceding pose.
pub const CPG_BLEND: f64 = 1.0;
const SHAKE_AMPLITUDE_DEG: f64 = 20.0;
const SHAKE_FREQUENCY: f64 = 2.0;

/// Per-joint sinusoid parameters: angle_k(t) = A_k·sin(2πft + φ_k) + offset_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpgParams {
    pub amplitude_yaw: f64,
    pub amplitude_pitch: f64,
    pub frequency: f64,
    pub phase: JointVector,
    /// Negates yaw amplitudes and yaw offsets.
    pub mirror: bool,
    /// Degrees.
    pub offset: JointVector,
    /// Axis of J1; the rest alternate.
    #[serde(default = "yaw")]
    pub first_axis: JointAxis,
}

fn yaw() -> JointAxis {
    JointAxis::Yaw
}

impl CpgParams {
    pub fn is_yaw(&self, k: usize) -> bool {
        (k % 2 == 0) == (self.first_axis == JointAxis::Yaw)
    }

    pub fn mirrored(&self) -> Self {
        Self {
            mirror: !self.mirror,
            ..self.clone()
        }
    }

    /// Signed amplitude and offset of joint `k`, degrees.
    fn joint_terms(&self, k: usize) -> (f64, f64) {
        if self.is_yaw(k) {
            let s = if self.mirror { -1.0 } else { 1.0 };
            (s * self.amplitude_yaw, s * self.offset[k])
        } else {
            (self.amplitude_pitch, self.offset[k])
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::InvalidInput(format!("gait frequency must be positive, got {}", self.frequency)));
        }
        for k in 0..NUM_JOINTS {
            let (a, o) = self.joint_terms(k);
            if a.abs() + o.abs() > JOINT_LIMIT_DEG + 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "J{}: amplitude {a}° + |offset {o}°| exceeds the {JOINT_LIMIT_DEG}° joint limit",
                    k + 1
                )));
            }
        }
        if self.phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("gait phases must be finite".into()));
        }
        Ok(())
    }
}

/// Joint angles in radians at time `t`.
pub fn cpg_angles(params: &CpgParams, t: f64) -> JointVector {
    let w = 2.0 * PI * params.frequency;
    let mut out = [0.0; NUM_JOINTS];
    for (k, q) in out.iter_mut().enumerate() {
        let (a, o) = params.joint_terms(k);
        *q = (a.to_radians()) * (w * t + params.phase[k]).sin() + o.to_radians();
    }
    out
}

/// Joint rates in rad/s at time `t`.
pub fn cpg_rates(params: &CpgParams, t: f64) -> JointVector {
    let w = 2.0 * PI * params.frequency;
    let mut out = [0.0; NUM_JOINTS];
    for (k, q) in out.iter_mut().enumerate() {
        let (a, _) = params.joint_terms(k);
        *q = a.to_radians() * w * (w * t + params.phase[k]).cos();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitName {
    Sidewinding,
    CRoll,
    SRoll,
    JRoll,
    SpiralPose,
    HexPose,
}

impl GaitName {
    pub const ALL: [GaitName; 6] = [
        GaitName::Sidewinding,
        GaitName::CRoll,
        GaitName::SRoll,
        GaitName::JRoll,
        GaitName::SpiralPose,
        GaitName::HexPose,
    ];
    /// The four locomotion gaits compared on flat ground.
    pub const PUSHING: [GaitName; 4] = [GaitName::Sidewinding, GaitName::CRoll, GaitName::SRoll, GaitName::JRoll];

    pub fn as_str(self) -> &'static str {
        match self {
            GaitName::Sidewinding => "sidewinding",
            GaitName::CRoll => "c_roll",
            GaitName::SRoll => "s_roll",
            GaitName::JRoll => "j_roll",
            GaitName::SpiralPose => "spiral_pose",
            GaitName::HexPose => "hex_pose",
        }
    }
}

impl fmt::Display for GaitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::UnknownGait(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaitMotion {
    Cpg(CpgParams),
    /// Fixed joint angles, radians.
    Pose { angles: JointVector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitPreset {
    pub name: GaitName,
    pub motion: GaitMotion,
}

impl GaitPreset {
    pub fn cpg(&self) -> Option<&CpgParams> {
        match &self.motion {
            GaitMotion::Cpg(p) => Some(p),
            GaitMotion::Pose { .. } => None,
        }
    }
}

/// Lateral rolling frequency, shared by c/s/j rolling.
pub const ROLL_FREQUENCY: f64 = 0.5;

fn quarter_phases(pattern: [u8; NUM_JOINTS]) -> JointVector {
    pattern.map(|p| FRAC_PI_2 * f64::from(p))
}

fn lateral_roll(offset: JointVector) -> CpgParams {
    CpgParams {
        amplitude_yaw: 20.0,
        amplitude_pitch: 20.0,
        frequency: ROLL_FREQUENCY,
        phase: quarter_phases([0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0]),
        mirror: false,
        offset,
        first_axis: JointAxis::Yaw,
    }
}

// Authored shape offsets, degrees. S: opposite yaw bends on the two halves.
// J: yaw bend on the head-side third only.
const S_ROLL_OFFSET: JointVector = [8.0, 0.0, 8.0, 0.0, 8.0, 0.0, -8.0, 0.0, -8.0, 0.0, -8.0];
const J_ROLL_OFFSET: JointVector = [20.0, 0.0, 20.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
const SPIRAL_YAW_DEG: f64 = 8.0;

pub fn preset(name: GaitName) -> GaitPreset {
    let motion = match name {
        GaitName::Sidewinding => GaitMotion::Cpg(CpgParams {
            amplitude_yaw: 60.0,
            amplitude_pitch: 14.0,
            frequency: 0.5,
            phase: quarter_phases([0, 0, 1, 1, 2, 2, 3, 3, 0, 0, 1]),
            mirror: false,
            offset: [0.0; NUM_JOINTS],
            first_axis: JointAxis::Yaw,
        }),
        GaitName::CRoll => GaitMotion::Cpg(lateral_roll([0.0; NUM_JOINTS])),
        GaitName::SRoll => GaitMotion::Cpg(lateral_roll(S_ROLL_OFFSET)),
        GaitName::JRoll => GaitMotion::Cpg(lateral_roll(J_ROLL_OFFSET)),
        GaitName::SpiralPose | GaitName::HexPose => GaitMotion::Pose {
            angles: fixed_pose(name).expect("pose preset"),
        },
    };
    GaitPreset { name, motion }
}

pub fn preset_named(name: &str) -> Result<GaitPreset> {
    Ok(preset(name.parse()?))
}

/// Closed-curve poses; `None` for rhythmic gaits.
pub fn fixed_pose(name: GaitName) -> Option<JointVector> {
    let mut q = [0.0; NUM_JOINTS];
    match name {
        GaitName::HexPose => {
            // five 60° pitch bends between pairs of modules close a hexagon
            for k in (1..NUM_JOINTS).step_by(2) {
                q[k] = 60f64.to_radians();
            }
        }
        GaitName::SpiralPose => {
            for (k, v) in q.iter_mut().enumerate() {
                *v = if k % 2 == 1 { 60f64 } else { SPIRAL_YAW_DEG }.to_radians();
            }
        }
        _ => return None,
    }
    Some(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatchCommand {
    None,
    /// Weld the box once the head is aligned with the socket.
    Engage,
    /// Free the box at the segment start.
    Release,
    /// Release and oscillate the head yaw joint.
    Shake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentMotion {
    Cpg(CpgParams),
    /// Eased move from the preceding pose to `target` (radians).
    Keyframe { target: JointVector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub motion: SegmentMotion,
    pub latch: LatchCommand,
}

impl Segment {
    pub fn keyframe(duration: f64, target_deg: JointVector, latch: LatchCommand) -> Self {
        Self {
            duration,
            motion: SegmentMotion::Keyframe {
                target: target_deg.map(f64::to_radians),
            },
            latch,
        }
    }

    pub fn cpg(duration: f64, params: CpgParams) -> Self {
        Self {
            duration,
            motion: SegmentMotion::Cpg(params),
            latch: LatchCommand::None,
        }
    }
}

/// Ordered gait segments starting from `initial` joint angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitTimeline {
    pub initial: JointVector,
    pub segments: Vec<Segment>,
}

/// One timeline sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitSample {
    pub q_ref: JointVector,
    pub qd_ref: JointVector,
    pub latch: LatchCommand,
    pub segment: usize,
}

impl GaitTimeline {
    pub fn single(params: CpgParams, duration: f64) -> Self {
        Self {
            initial: [0.0; NUM_JOINTS],
            segments: vec![Segment::cpg(duration, params)],
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidInput("timeline has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(Error::InvalidInput(format!("segment {i}: duration must be positive")));
            }
            match &s.motion {
                SegmentMotion::Cpg(p) => p.validate()?,
                SegmentMotion::Keyframe { target } => {
                    if target.iter().any(|q| !(q.abs() <= FRAC_PI_2 + 1e-12)) {
                        return Err(Error::InvalidInput(format!("segment {i}: keyframe outside joint limits")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Pose at the end of each segment, used as the start of the next.
    fn segment_starts(&self) -> Vec<JointVector> {
        let mut starts = Vec::with_capacity(self.segments.len());
        let mut cur = self.initial;
        for s in &self.segments {
            starts.push(cur);
            cur = eval_segment(s, &cur, s.duration).0;
        }
        starts
    }

    /// References and latch command at time `t`.
    pub fn sample(&self, t: f64) -> Result<GaitSample> {
        let starts = self.segment_starts();
        self.sample_with(&starts, t)
    }

    fn sample_with(&self, starts: &[JointVector], t: f64) -> Result<GaitSample> {
        let total = self.duration();
        if !(t >= 0.0 && t <= total + 1e-9) || self.segments.is_empty() {
            return Err(Error::TimeOutOfRange { t, duration: total });
        }
        let mut t0 = 0.0;
        let last = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            if t < t0 + s.duration || i == last {
                let local = (t - t0).clamp(0.0, s.duration);
                let (q_ref, qd_ref) = eval_segment(s, &starts[i], local);
                return Ok(GaitSample {
                    q_ref,
                    qd_ref,
                    latch: s.latch,
                    segment: i,
                });
            }
            t0 += s.duration;
        }
        unreachable!("timeline sampling fell through")
    }

    /// A sampler that caches segment start poses.
    pub fn sampler(&self) -> Sampler<'_> {
        Sampler {
            timeline: self,
            starts: self.segment_starts(),
        }
    }
}

pub struct Sampler<'a> {
    timeline: &'a GaitTimeline,
    starts: Vec<JointVector>,
}

impl Sampler<'_> {
    pub fn sample(&self, t: f64) -> Result<GaitSample> {
        self.timeline.sample_with(&self.starts, t)
    }
}

fn ease_rate(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        6.0 * x * (1.0 - x)
    } else {
        0.0
    }
}

fn eval_segment(seg: &Segment, start: &JointVector, t: f64) -> (JointVector, JointVector) {
    let mut q = [0.0; NUM_JOINTS];
    let mut qd = [0.0; NUM_JOINTS];
    match &seg.motion {
        SegmentMotion::Keyframe { target } => {
            let x = t / seg.duration;
            let s = smoothstep(x);
            let sd = ease_rate(x) / seg.duration;
            for k in 0..NUM_JOINTS {
                q[k] = start[k] + (target[k] - start[k]) * s;
                qd[k] = (target[k] - start[k]) * sd;
            }
            if seg.latch == LatchCommand::Shake {
                let env = (PI * x).sin();
                let w = 2.0 * PI * SHAKE_FREQUENCY;
                let a = SHAKE_AMPLITUDE_DEG.to_radians();
                q[0] += a * env * (w * t).sin();
                qd[0] += a * (env * w * (w * t).cos() + PI / seg.duration * (PI * x).cos() * (w * t).sin());
            }
        }
        SegmentMotion::Cpg(p) => {
            let base = cpg_angles(p, t);
            let rate = cpg_rates(p, t);
            let at0 = cpg_angles(p, 0.0);
            let blend = CPG_BLEND.min(seg.duration);
            let x = t / blend;
            let keep = 1.0 - smoothstep(x);
            let keep_rate = -ease_rate(x) / blend;
            for k in 0..NUM_JOINTS {
                let gap = start[k] - at0[k];
                q[k] = base[k] + gap * keep;
                qd[k] = rate[k] + gap * keep_rate;
            }
        }
    }
    for (k, v) in q.iter_mut().enumerate() {
        if v.abs() > FRAC_PI_2 {
            *v = v.clamp(-FRAC_PI_2, FRAC_PI_2);
            qd[k] = 0.0;
        }
    }
    (q, qd)
}

/// Timeline that drives a scenario with a given pushing gait (ignored by
/// scenarios whose maneuver fixes its own gait).
pub fn timeline_for_scenario(name: ScenarioName, gait: &CpgParams, duration: f64) -> GaitTimeline {
    match name {
        ScenarioName::FlatPush => GaitTimeline::single(gait.clone(), duration),
        ScenarioName::LiftPlace => lift_place_timeline(),
        ScenarioName::PickPlace => pick_place_timeline(),
        ScenarioName::RampAscent => ramp_ascent_timeline(duration),
    }
}

/// Default timeline for a scenario with its default gait.
pub fn default_timeline(name: ScenarioName, duration: f64) -> GaitTimeline {
    let gait = preset(default_gait(name)).cpg().cloned().expect("rhythmic default gait");
    timeline_for_scenario(name, &gait, duration)
}

pub fn default_gait(name: ScenarioName) -> GaitName {
    match name {
        ScenarioName::FlatPush => GaitName::Sidewinding,
        _ => GaitName::SRoll,
    }
}

/// Default rollout length of a scenario.
pub fn default_duration(name: ScenarioName) -> f64 {
    match name {
        ScenarioName::FlatPush => 10.0,
        ScenarioName::LiftPlace => lift_place_timeline().duration(),
        ScenarioName::PickPlace => pick_place_timeline().duration(),
        ScenarioName::RampAscent => 127.0,
    }
}

const Z: f64 = 0.0;

// Authored maneuver keyframes (degrees, J1..J11).
const TAIL_CURL: JointVector = [Z, Z, Z, Z, Z, Z, -40.0, Z, -40.0, Z, -40.0];
const NECK_UP: JointVector = [Z, -90.0, Z, Z, Z, Z, -40.0, Z, -40.0, Z, -40.0];
const TOWER: JointVector = [Z, Z, Z, -90.0, Z, Z, -40.0, Z, -40.0, Z, -40.0];
const LEAN: JointVector = [Z, Z, 45.0, -90.0, Z, Z, -40.0, Z, -40.0, Z, -40.0];

fn lift_segments() -> Vec<Segment> {
    use LatchCommand::*;
    vec![
        Segment::keyframe(1.0, TAIL_CURL, Engage),
        Segment::keyframe(2.0, NECK_UP, None),
        Segment::keyframe(3.0, TOWER, None),
        Segment::keyframe(2.0, LEAN, None),
        Segment::keyframe(0.5, LEAN, None),
    ]
}

fn release_segments() -> Vec<Segment> {
    use LatchCommand::*;
    vec![
        Segment::keyframe(1.0, LEAN, Release),
        Segment::keyframe(1.5, LEAN, Shake),
        Segment::keyframe(2.0, TOWER, None),
        Segment::keyframe(1.0, TOWER, None),
    ]
}

fn lift_place_timeline() -> GaitTimeline {
    let mut segments = lift_segments();
    segments.extend(release_segments());
    GaitTimeline {
        initial: [0.0; NUM_JOINTS],
        segments,
    }
}

// Pick keyframes: stand the neck up, turn it toward the platform with J5,
// then fold the head down onto the docking face.
const TURN_TO_PLATFORM: JointVector = [Z, Z, Z, -90.0, -80.0, Z, -40.0, Z, -40.0, Z, -40.0];
const REACH_PLATFORM: JointVector = [Z, 79.0, Z, -90.0, -80.0, Z, -40.0, Z, -40.0, Z, -40.0];
const TURN_TO_FRONT: JointVector = [Z, Z, Z, -90.0, 60.0, Z, -40.0, Z, -40.0, Z, -40.0];
const REACH_FRONT: JointVector = [Z, 79.0, Z, -90.0, 60.0, Z, -40.0, Z, -40.0, Z, -40.0];

fn pick_place_segments() -> Vec<Segment> {
    use LatchCommand::*;
    vec![
        Segment::keyframe(1.0, TAIL_CURL, None),
        Segment::keyframe(3.0, TOWER, None),
        Segment::keyframe(3.0, TURN_TO_PLATFORM, None),
        Segment::keyframe(3.0, REACH_PLATFORM, None),
        Segment::keyframe(1.0, REACH_PLATFORM, Engage),
        Segment::keyframe(3.0, TURN_TO_PLATFORM, None),
        Segment::keyframe(4.0, TURN_TO_FRONT, None),
        Segment::keyframe(3.0, REACH_FRONT, None),
        Segment::keyframe(1.0, REACH_FRONT, Release),
        Segment::keyframe(1.5, REACH_FRONT, Shake),
        Segment::keyframe(2.0, TURN_TO_FRONT, None),
        Segment::keyframe(3.0, TOWER, None),
        Segment::keyframe(3.0, TAIL_CURL, None),
    ]
}

fn pick_place_timeline() -> GaitTimeline {
    GaitTimeline {
        initial: [0.0; NUM_JOINTS],
        segments: pick_place_segments(),
    }
}

/// Rolling gait used to push the box up the ramp.
pub fn ramp_push_gait() -> CpgParams {
    let mut p = preset(GaitName::SRoll).cpg().cloned().expect("s_roll is rhythmic");
    p.amplitude_yaw = RAMP_PUSH_AMPLITUDE_DEG;
    p.amplitude_pitch = RAMP_PUSH_AMPLITUDE_DEG;
    p.frequency = RAMP_PUSH_FREQUENCY;
    p
}

const RAMP_PUSH_AMPLITUDE_DEG: f64 = 30.0;
const RAMP_PUSH_FREQUENCY: f64 = 1.0;

fn ramp_ascent_timeline(duration: f64) -> GaitTimeline {
    let mut segments = pick_place_segments();
    segments.push(Segment::keyframe(1.0, [0.0; NUM_JOINTS], LatchCommand::None));
    let used: f64 = segments.iter().map(|s| s.duration).sum();
    segments.push(Segment::cpg((duration - used).max(1.0), ramp_push_gait()));
    GaitTimeline {
        initial: [0.0; NUM_JOINTS],
        segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sw() -> CpgParams {
        preset(GaitName::Sidewinding).cpg().unwrap().clone()
    }

    #[test]
    fn sidewinding_examples() {
        let p = sw();
        assert_eq!(cpg_angles(&p, 0.0)[0], 0.0);
        assert_relative_eq!(cpg_angles(&p, 0.5)[0], 60f64.to_radians(), epsilon = 1e-12);
        assert_relative_eq!(p.phase[2], FRAC_PI_2);
        assert_relative_eq!(p.amplitude_pitch, 14.0);
    }

    #[test]
    fn c_roll_shares_values() {
        let p = preset(GaitName::CRoll).cpg().unwrap().clone();
        assert_eq!(p.amplitude_yaw, 20.0);
        assert_eq!(p.amplitude_pitch, 20.0);
        for t in [0.0, 0.3, 1.1, 1.7] {
            let q = cpg_angles(&p, t);
            for k in (2..NUM_JOINTS).step_by(2) {
                assert_eq!(q[k], q[0]);
            }
            for k in (3..NUM_JOINTS).step_by(2) {
                assert_eq!(q[k], q[1]);
            }
            // quarter period apart: pitch(t) = yaw(t + T/4)
            let ahead = cpg_angles(&p, t + 0.25 / p.frequency);
            assert_relative_eq!(q[1], ahead[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn presets_are_valid_and_named() {
        for g in GaitName::ALL {
            let p = preset(g);
            assert_eq!(p.name, g);
            if let Some(c) = p.cpg() {
                c.validate().unwrap();
            }
            assert_eq!(g.as_str().parse::<GaitName>().unwrap(), g);
        }
        assert!(matches!(preset_named("moonwalk"), Err(Error::UnknownGait(_))));
    }

    #[test]
    fn j_roll_offsets_head_third_only() {
        let p = preset(GaitName::JRoll).cpg().unwrap().clone();
        assert!(p.offset[..4].iter().any(|o| *o != 0.0));
        assert!(p.offset[4..].iter().all(|o| *o == 0.0));
    }

    #[test]
    fn hex_pose_angles() {
        let q = fixed_pose(GaitName::HexPose).unwrap();
        for (k, v) in q.iter().enumerate() {
            if k % 2 == 1 {
                assert_relative_eq!(*v, 60f64.to_radians());
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        for g in [GaitName::HexPose, GaitName::SpiralPose] {
            assert!(fixed_pose(g).unwrap().iter().all(|v| v.abs() <= FRAC_PI_2));
        }
        assert!(fixed_pose(GaitName::CRoll).is_none());
    }

    #[test]
    fn out_of_range_amplitude_rejected() {
        let mut p = sw();
        p.offset[0] = 40.0;
        assert!(p.validate().is_err());
        p.offset[0] = 0.0;
        p.frequency = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn timeline_starts_at_initial_pose() {
        for s in ScenarioName::ALL {
            let tl = default_timeline(s, default_duration(s));
            tl.validate().unwrap();
            let q0 = tl.sample(0.0).unwrap().q_ref;
            for (a, b) in q0.iter().zip(tl.initial.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn timeline_boundaries_continuous() {
        for s in ScenarioName::ALL {
            let tl = default_timeline(s, default_duration(s));
            let mut t = 0.0;
            for seg in &tl.segments[..tl.segments.len() - 1] {
                t += seg.duration;
                let left = tl.sample(t - 1e-12).unwrap().q_ref;
                let right = tl.sample(t).unwrap().q_ref;
                for k in 0..NUM_JOINTS {
                    assert!((left[k] - right[k]).abs() < 1e-9, "{s} t={t} J{}", k + 1);
                }
            }
        }
    }

    #[test]
    fn keyframe_interpolation_is_monotone() {
        let mut target = [0.0; NUM_JOINTS];
        target[3] = -90.0;
        let tl = GaitTimeline {
            initial: [0.0; NUM_JOINTS],
            segments: vec![Segment::keyframe(2.0, target, LatchCommand::None)],
        };
        let mut prev = 0.0;
        for i in 1..=200 {
            let q = tl.sample(2.0 * f64::from(i) / 200.0).unwrap().q_ref[3];
            assert!(q <= prev + 1e-15);
            prev = q;
        }
        assert_relative_eq!(prev, -FRAC_PI_2, epsilon = 1e-12);
        // cubic ease: halfway is halfway
        assert_relative_eq!(tl.sample(1.0).unwrap().q_ref[3], -FRAC_PI_2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sample_out_of_range() {
        let tl = GaitTimeline::single(sw(), 2.0);
        assert!(matches!(tl.sample(-0.1), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(tl.sample(2.5), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn scenario_timelines_structure() {
        let sw = sw();
        let flat = timeline_for_scenario(ScenarioName::FlatPush, &sw, 10.0);
        assert_eq!(flat.segments.len(), 1);
        assert_eq!(flat.segments[0].latch, LatchCommand::None);

        let lift = default_timeline(ScenarioName::LiftPlace, 0.0);
        let engage = lift.segments.iter().position(|s| s.latch == LatchCommand::Engage).unwrap();
        let release = lift.segments.iter().position(|s| s.latch == LatchCommand::Release).unwrap();
        assert!(engage < release);

        let pick = default_timeline(ScenarioName::PickPlace, 0.0);
        let engage = pick.segments.iter().position(|s| s.latch == LatchCommand::Engage).unwrap();
        let release = pick.segments.iter().position(|s| s.latch == LatchCommand::Release).unwrap();
        assert!(engage < release);

        let ramp = default_timeline(ScenarioName::RampAscent, 127.0);
        assert_relative_eq!(ramp.duration(), 127.0, epsilon = 1e-9);
        assert_eq!(ramp.segments[..pick.segments.len()], pick.segments[..]);
        let SegmentMotion::Cpg(last) = &ramp.segments.last().unwrap().motion else {
            panic!("ramp ascent must end with a rhythmic segment");
        };
        let s = preset(GaitName::SRoll).cpg().unwrap().clone();
        assert_eq!(last.phase, s.phase);
        assert_eq!(last.offset, s.offset);
    }

    proptest! {
        #[test]
        fn cpg_is_periodic(t in 0.0f64..20.0, g in 0usize..4) {
            let p = preset(GaitName::PUSHING[g]).cpg().unwrap().clone();
            let a = cpg_angles(&p, t);
            let b = cpg_angles(&p, t + 1.0 / p.frequency);
            for k in 0..NUM_JOINTS {
                prop_assert!((a[k] - b[k]).abs() <= 1e-12);
            }
        }

        #[test]
        fn mirror_negates_yaw_only(t in 0.0f64..20.0) {
            let p = preset(GaitName::JRoll).cpg().unwrap().clone();
            let m = p.mirrored();
            let a = cpg_angles(&p, t);
            let b = cpg_angles(&m, t);
            for k in 0..NUM_JOINTS {
                if p.is_yaw(k) {
                    prop_assert_eq!(a[k], -b[k]);
                } else {
                    prop_assert_eq!(a[k], b[k]);
                }
            }
        }

        #[test]
        fn sampled_references_within_limits(frac in 0.0f64..1.0, s in 0usize..4) {
            let name = ScenarioName::ALL[s];
            let tl = default_timeline(name, default_duration(name));
            let q = tl.sample(frac * tl.duration()).unwrap().q_ref;
            prop_assert!(q.iter().all(|v| v.abs() <= FRAC_PI_2));
        }

        #[test]
        fn cpg_rates_match_derivative(t in 0.0f64..10.0) {
            let p = sw();
            let h = 1e-6;
            let a = cpg_angles(&p, t + h);
            let b = cpg_angles(&p, t - h);
            let r = cpg_rates(&p, t);
            for k in 0..NUM_JOINTS {
                prop_assert!(((a[k] - b[k]) / (2.0 * h) - r[k]).abs() < 1e-6);
            }
        }
    }
}
