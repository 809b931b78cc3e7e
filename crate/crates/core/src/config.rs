//! JSON run configuration. Every key is optional; defaults carry the
//! documented robot, scene and contact constants.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::contact::{ContactParams, FrictionParams, NormalForceParams};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::gait::{self, CpgParams, GaitMotion, GaitName, GaitTimeline, LatchCommand, Segment, SegmentMotion};
use crate::metrics::WorkConvention;
use crate::model::{
    self, build_default_robot, initial_pose, JointAxis, RobotModel, ScenarioName, SceneSpec, SystemState,
    BOX_EDGE, BOX_MASS, DEFAULT_KD, DEFAULT_KP, GRAVITY, LINK_MASS, NUM_JOINTS, PLATFORM_HEIGHT, RAMP_ANGLE_DEG,
};
use crate::planner::{CostWeights, ForceMode, QpSettings, RolloutConfig, ShootingProblem};
use crate::scenario::{scene_with, SceneOverrides};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    pub name: Option<GaitName>,
    pub amplitude_yaw_deg: Option<f64>,
    pub amplitude_pitch_deg: Option<f64>,
    pub frequency: Option<f64>,
    pub phase: Option<[f64; NUM_JOINTS]>,
    pub offset_deg: Option<[f64; NUM_JOINTS]>,
    pub mirror: Option<bool>,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            name: None,
            amplitude_yaw_deg: None,
            amplitude_pitch_deg: None,
            frequency: None,
            phase: None,
            offset_deg: None,
            mirror: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxConfig {
    pub mass: f64,
    pub size: [f64; 3],
    /// Initial centre (x, y); scenario layout when absent.
    pub position: Option<[f64; 2]>,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            mass: BOX_MASS,
            size: [BOX_EDGE; 3],
            position: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformConfig {
    pub height: f64,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self { height: PLATFORM_HEIGHT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    pub angle_deg: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            angle_deg: RAMP_ANGLE_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub link_mass: f64,
    pub first_joint_axis: JointAxis,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            link_mass: LINK_MASS,
            first_joint_axis: JointAxis::Yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub k: f64,
    pub b: f64,
    pub w: f64,
    pub mu_s: f64,
    pub mu_d: f64,
    pub v_crit: f64,
    #[serde(rename = "self")]
    pub self_contact: bool,
}

impl Default for ContactConfig {
    fn default() -> Self {
        let n = NormalForceParams::default();
        let f = FrictionParams::default();
        Self {
            k: n.k,
            b: n.b,
            w: n.w,
            mu_s: f.mu_s,
            mu_d: f.mu_d,
            v_crit: f.v_crit,
            self_contact: false,
        }
    }
}

impl ContactConfig {
    pub fn params(&self) -> ContactParams {
        ContactParams {
            normal: NormalForceParams {
                k: self.k,
                b: self.b,
                w: self.w,
            },
            friction: FrictionParams {
                mu_s: self.mu_s,
                mu_d: self.mu_d,
                v_crit: self.v_crit,
            },
            self_contact: self.self_contact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointsConfig {
    pub kp: f64,
    pub kd: f64,
}

impl Default for JointsConfig {
    fn default() -> Self {
        Self {
            kp: DEFAULT_KP,
            kd: DEFAULT_KD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub budget: usize,
    /// Goal tracking, contact objective, torque effort.
    pub weights: [f64; 3],
    pub force_mode: ForceMode,
    pub seed_gait: GaitName,
    /// Box target; defaults to `goal_distance` beyond the initial box position
    /// along the robot-to-box direction.
    pub goal: Option<[f64; 3]>,
    pub goal_distance: f64,
    pub horizon: f64,
    pub qp_tol: f64,
    pub qp_max_sweeps: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let w = CostWeights::default();
        let qp = QpSettings::default();
        Self {
            budget: 200,
            weights: [w.goal, w.contact, w.torque],
            force_mode: ForceMode::Penalty,
            seed_gait: GaitName::CRoll,
            goal: None,
            goal_distance: 0.5,
            horizon: 8.0,
            qp_tol: qp.tol,
            qp_max_sweeps: qp.max_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub sample_hz: f64,
    pub full_rate: bool,
    pub dir: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            sample_hz: 100.0,
            full_rate: false,
            dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub work_convention: WorkConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    pub gait: GaitConfig,
    /// Seconds; scenario default when absent.
    pub duration: Option<f64>,
    pub gravity: f64,
    #[serde(rename = "box")]
    pub box_: BoxConfig,
    pub platform: PlatformConfig,
    pub ramp: RampConfig,
    pub robot: RobotConfig,
    pub contact: ContactConfig,
    pub integrator: IntegratorConfig,
    pub joints: JointsConfig,
    pub planner: Option<PlannerConfig>,
    pub output: OutputConfig,
    pub metrics: MetricsConfig,
    /// Seeds the planner's coordinate order.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::FlatPush,
            gait: GaitConfig::default(),
            duration: None,
            gravity: GRAVITY,
            box_: BoxConfig::default(),
            platform: PlatformConfig::default(),
            ramp: RampConfig::default(),
            robot: RobotConfig::default(),
            contact: ContactConfig::default(),
            integrator: IntegratorConfig::default(),
            joints: JointsConfig::default(),
            planner: None,
            output: OutputConfig::default(),
            metrics: MetricsConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> RobotModel {
        let mut m = build_default_robot();
        if self.robot.link_mass != LINK_MASS {
            m.set_link_mass(self.robot.link_mass);
        }
        m.set_first_joint_axis(self.robot.first_joint_axis);
        m.set_gains(self.joints.kp, self.joints.kd);
        m
    }

    pub fn scene(&self, model: &RobotModel) -> SceneSpec {
        let o = SceneOverrides {
            gravity: self.gravity,
            box_mass: self.box_.mass,
            box_size: Vector3::from(self.box_.size),
            platform_height: self.platform.height,
            ramp_angle_deg: self.ramp.angle_deg,
            contact: self.contact.params(),
            box_xy: self.box_position(),
        };
        scene_with(model, self.scenario, &o)
    }

    /// A mirrored gait rolls toward −y, so flat_push meets it with the box
    /// reflected across the body axis.
    fn box_position(&self) -> Option<[f64; 2]> {
        if self.box_.position.is_some() {
            return self.box_.position;
        }
        let mirrored = self.gait.mirror.unwrap_or(false);
        (self.scenario == ScenarioName::FlatPush && mirrored).then(|| {
            let [x, y] = crate::scenario::FLAT_PUSH_BOX;
            [x, -y]
        })
    }

    pub fn initial_state(&self, model: &RobotModel, scene: &SceneSpec) -> SystemState {
        initial_pose(model, scene, self.scenario)
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| gait::default_duration(self.scenario))
    }

    pub fn gait_name(&self) -> GaitName {
        self.gait.name.unwrap_or_else(|| gait::default_gait(self.scenario))
    }

    /// Preset `gait.name` with the per-field overrides applied.
    pub fn gait_params(&self) -> Result<Option<CpgParams>> {
        let preset = gait::preset(self.gait_name());
        let GaitMotion::Cpg(mut p) = preset.motion else {
            return Ok(None);
        };
        let g = &self.gait;
        if let Some(v) = g.amplitude_yaw_deg {
            p.amplitude_yaw = v;
        }
        if let Some(v) = g.amplitude_pitch_deg {
            p.amplitude_pitch = v;
        }
        if let Some(v) = g.frequency {
            p.frequency = v;
        }
        if let Some(v) = g.phase {
            p.phase = v;
        }
        if let Some(v) = g.offset_deg {
            p.offset = v;
        }
        if let Some(v) = g.mirror {
            p.mirror = v;
        }
        p.first_axis = self.robot.first_joint_axis;
        p.validate()?;
        Ok(Some(p))
    }

    pub fn timeline(&self) -> Result<GaitTimeline> {
        let duration = self.duration();
        let tl = match self.gait_params()? {
            Some(p) => gait::timeline_for_scenario(self.scenario, &p, duration),
            None => {
                let pose = gait::fixed_pose(self.gait_name()).expect("pose gait");
                GaitTimeline {
                    initial: [0.0; NUM_JOINTS],
                    segments: vec![Segment {
                        duration: duration.max(1e-3),
                        motion: SegmentMotion::Keyframe { target: pose },
                        latch: LatchCommand::None,
                    }],
                }
            }
        };
        tl.validate()?;
        Ok(tl)
    }

    pub fn rollout_config(&self) -> RolloutConfig {
        let planner = self.planner.clone().unwrap_or_default();
        RolloutConfig {
            integrator: self.integrator,
            sample_hz: self.output.sample_hz,
            full_rate: self.output.full_rate,
            force_mode: planner.force_mode,
            contacts: true,
            log_contacts: true,
            objective: true,
            qp: QpSettings {
                tol: planner.qp_tol,
                max_sweeps: planner.qp_max_sweeps,
            },
        }
    }

    /// Checks every value; errors list each violation by key.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if let Some(d) = self.duration {
            if !(d > 0.0) || !d.is_finite() {
                errs.push(format!("duration: must be positive, got {d}"));
            }
        }
        match self.integrator.validate() {
            Err(Error::Config(m)) => errs.push(m),
            Err(e) => errs.push(e.to_string()),
            Ok(()) => {}
        }
        if !(self.output.sample_hz > 0.0) {
            errs.push("output.sample_hz: must be positive".into());
        }
        if !(self.joints.kp >= 0.0) || !(self.joints.kd >= 0.0) {
            errs.push("joints.kp/kd: gains must be non-negative".into());
        }
        if !(self.robot.link_mass > 0.0) {
            errs.push(format!("robot.link_mass: must be positive, got {}", self.robot.link_mass));
        }
        if !(self.box_.mass > 0.0) {
            errs.push(format!("box.mass: must be positive, got {}", self.box_.mass));
        }
        if self.box_.size.iter().any(|s| !(*s > 0.0)) {
            errs.push("box.size: edges must be positive".into());
        }
        if !(self.platform.height > 0.0) {
            errs.push("platform.height: must be positive".into());
        }
        if errs.is_empty() {
            let model = self.model();
            let scene = self.scene(&model);
            for v in model::validate(&model, &scene).violations {
                errs.push(format!("{}: {}", v.path, v.message));
            }
            if let Err(e) = self.timeline() {
                errs.push(format!("gait: {e}"));
            }
        }
        if let Some(p) = &self.planner {
            if p.budget == 0 {
                errs.push("planner.budget: must be at least 1".into());
            }
            if !(p.horizon > 0.0) {
                errs.push("planner.horizon: must be positive".into());
            }
            if p.weights.iter().any(|w| !(*w >= 0.0)) {
                errs.push("planner.weights: must be non-negative".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    /// Box target: explicit goal, or `goal_distance` past the initial box
    /// along the horizontal direction from the robot's mid-body to the box.
    pub fn goal(&self, model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> Vector3<f64> {
        let p = self.planner.clone().unwrap_or_default();
        if let Some(g) = p.goal {
            return Vector3::from(g);
        }
        let mid = crate::trajectory::robot_com(model, state);
        let b = scene.box_spec.initial_pose.translation.vector;
        let mut dir = b - mid;
        dir.z = 0.0;
        let dir = if dir.norm() > 1e-9 { dir.normalize() } else { Vector3::x() };
        b + dir * p.goal_distance
    }

    pub fn shooting_problem(&self, model: &RobotModel, goal: Option<Vector3<f64>>) -> ShootingProblem {
        let scene = self.scene(model);
        let initial = self.initial_state(model, &scene);
        let p = self.planner.clone().unwrap_or_default();
        let goal = goal.unwrap_or_else(|| self.goal(model, &scene, &initial));
        let mut rollout = self.rollout_config();
        rollout.log_contacts = true;
        ShootingProblem {
            scene,
            initial,
            horizon: p.horizon,
            goal,
            weights: CostWeights {
                goal: p.weights[0],
                contact: p.weights[1],
                torque: p.weights[2],
            },
            rollout,
            seed: self.seed,
        }
    }

    pub fn seed_params(&self) -> Result<CpgParams> {
        let p = self.planner.clone().unwrap_or_default();
        gait::preset(p.seed_gait)
            .cpg()
            .cloned()
            .ok_or_else(|| Error::Config(format!("planner.seed_gait `{}` is not rhythmic", p.seed_gait)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_is_default() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn dotted_keys_map() {
        let c = RunConfig::from_json(
            r#"{"scenario":"ramp_ascent","gravity":9.0,"box":{"mass":0.7,"size":[0.2,0.25,0.2]},
                "platform":{"height":0.35},"ramp":{"angle_deg":20.0},"robot":{"link_mass":0.6},
                "contact":{"k":2e4,"self":true},"integrator":{"dt":5e-5,"scheme":"rk4","renormalize_every":1},
                "joints":{"kp":40.0,"kd":0.5},"gait":{"name":"s_roll","frequency":0.4,"mirror":true}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        let m = c.model();
        assert_eq!(m.links[3].mass, 0.6);
        assert_eq!(m.joints[0].internal_stiffness, 40.0);
        let s = c.scene(&m);
        assert_eq!(s.gravity, 9.0);
        assert_eq!(s.box_spec.mass, 0.7);
        assert_eq!(s.ramp.as_ref().unwrap().angle_deg, 20.0);
        assert_eq!(s.contact.normal.k, 2e4);
        assert!(s.contact.self_contact);
        let g = c.gait_params().unwrap().unwrap();
        assert_eq!(g.frequency, 0.4);
        assert!(g.mirror);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"gravitee": 1}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"scenario": "moon"}"#), Err(Error::Config(_))));
        let c = RunConfig::from_json(r#"{"integrator":{"dt":0.01}}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(r#"{"box":{"mass":-1}}"#).unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("box.mass"), "{e}");
        let c = RunConfig::from_json(r#"{"scenario":"ramp_ascent","ramp":{"angle_deg":40}}"#).unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("static infeasibility"), "{e}");
    }

    #[test]
    fn pose_gait_timeline() {
        let c = RunConfig::from_json(r#"{"gait":{"name":"hex_pose"},"duration":2.0}"#).unwrap();
        let tl = c.timeline().unwrap();
        assert_eq!(tl.segments.len(), 1);
        let q = tl.sample(2.0).unwrap().q_ref;
        assert_eq!(q, gait::fixed_pose(GaitName::HexPose).unwrap());
    }
}
