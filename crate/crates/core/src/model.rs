//! Robot, box and scene descriptions plus the mutable simulation state.
//!
//! The robot is a 12-module chain: head, ten body links and tail, joined by
//! eleven revolute joints whose axes alternate yaw/pitch. Each link frame has
//! its origin at the head-side interface with +x running toward the tail.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, SVector, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::ContactParams;
use crate::error::{Error, Result};
use crate::geometry::{Capsule, ConvexPolytope, Cuboid, Plane};

pub const NUM_LINKS: usize = 12;
pub const NUM_JOINTS: usize = 11;
/// Robot velocity coordinates: base twist plus joint rates.
pub const ROBOT_DOFS: usize = 6 + NUM_JOINTS;
pub const BOX_DOFS: usize = 6;
/// Full generalized velocity dimension (robot + free box).
pub const NV: usize = ROBOT_DOFS + BOX_DOFS;

pub const BASE_LINEAR: usize = 0;
pub const BASE_ANGULAR: usize = 3;
pub const JOINT_RATES: usize = 6;
pub const BOX_LINEAR: usize = ROBOT_DOFS;
pub const BOX_ANGULAR: usize = ROBOT_DOFS + 3;

pub type GenVector = SVector<f64, NV>;
pub type JointVector = [f64; NUM_JOINTS];

pub const TOTAL_LENGTH: f64 = 1.6;
pub const MODULE_DIAMETER: f64 = 0.10;
pub const LINK_MASS: f64 = 0.5;
pub const TORQUE_LIMIT: f64 = 6.9;
pub const DEFAULT_KP: f64 = 50.0;
pub const DEFAULT_KD: f64 = 1.0;

const HEAD_INERTIA: [f64; 3] = [4.4562e-4, 1.710e-3, 1.793e-3];
const BODY_INERTIA: [f64; 3] = [7.167e-4, 8.704e-4, 8.626e-4];
const TAIL_INERTIA: [f64; 3] = [8.182e-4, 1.141e-3, 1.109e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointAxis {
    /// Rotation about the link z axis (body-lateral bending).
    Yaw,
    /// Rotation about the link y axis (body-vertical bending).
    Pitch,
}

impl JointAxis {
    pub fn local(self) -> Vector3<f64> {
        match self {
            JointAxis::Yaw => Vector3::z(),
            JointAxis::Pitch => Vector3::y(),
        }
    }

    fn other(self) -> Self {
        match self {
            JointAxis::Yaw => JointAxis::Pitch,
            JointAxis::Pitch => JointAxis::Yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    /// Principal moments about the COM, aligned with the link frame.
    pub inertia_diag: Vector3<f64>,
    pub shape: Capsule,
    /// COM shift from the module midpoint, link frame.
    pub com_offset: Vector3<f64>,
    /// Interface-to-interface module length.
    pub length: f64,
}

impl LinkSpec {
    pub fn com_local(&self) -> Vector3<f64> {
        Vector3::new(0.5 * self.length, 0.0, 0.0) + self.com_offset
    }

    pub fn capsule_center_x(&self) -> f64 {
        0.5 * self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub axis: JointAxis,
    pub position_limit: f64,
    /// Servo position gain, N·m/rad.
    pub internal_stiffness: f64,
    /// Servo velocity gain, N·m·s/rad.
    pub internal_damping: f64,
    pub torque_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub total_length: f64,
    pub module_diameter: f64,
}

impl RobotModel {
    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.module_diameter
    }

    /// Indices of joints with the given axis.
    pub fn joints_with_axis(&self, axis: JointAxis) -> Vec<usize> {
        self.joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.axis == axis)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn set_first_joint_axis(&mut self, first: JointAxis) {
        let mut axis = first;
        for j in &mut self.joints {
            j.axis = axis;
            axis = axis.other();
        }
    }

    pub fn set_link_mass(&mut self, mass: f64) {
        for l in &mut self.links {
            let scale = mass / l.mass;
            l.mass = mass;
            l.inertia_diag *= scale;
        }
    }

    pub fn set_gains(&mut self, kp: f64, kd: f64) {
        for j in &mut self.joints {
            j.internal_stiffness = kp;
            j.internal_damping = kd;
        }
    }
}

/// The 12-module robot with its documented mass and inertia constants.
pub fn build_default_robot() -> RobotModel {
    let module = TOTAL_LENGTH / NUM_LINKS as f64;
    let radius = 0.5 * MODULE_DIAMETER;
    let shape = Capsule {
        radius,
        half_length: 0.5 * module - radius,
    };
    let links = (0..NUM_LINKS)
        .map(|i| {
            let (name, inertia) = match i {
                0 => ("head".to_string(), HEAD_INERTIA),
                i if i == NUM_LINKS - 1 => ("tail".to_string(), TAIL_INERTIA),
                i => (format!("L{i}"), BODY_INERTIA),
            };
            LinkSpec {
                name,
                mass: LINK_MASS,
                inertia_diag: Vector3::from(inertia),
                shape,
                com_offset: Vector3::zeros(),
                length: module,
            }
        })
        .collect();
    let joints = (0..NUM_JOINTS)
        .map(|k| JointSpec {
            name: format!("J{}", k + 1),
            axis: if k % 2 == 0 { JointAxis::Yaw } else { JointAxis::Pitch },
            position_limit: FRAC_PI_2,
            internal_stiffness: DEFAULT_KP,
            internal_damping: DEFAULT_KD,
            torque_limit: TORQUE_LIMIT,
        })
        .collect();
    RobotModel {
        links,
        joints,
        total_length: TOTAL_LENGTH,
        module_diameter: MODULE_DIAMETER,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    FlatPush,
    LiftPlace,
    PickPlace,
    RampAscent,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::FlatPush,
        ScenarioName::LiftPlace,
        ScenarioName::PickPlace,
        ScenarioName::RampAscent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::FlatPush => "flat_push",
            ScenarioName::LiftPlace => "lift_place",
            ScenarioName::PickPlace => "pick_place",
            ScenarioName::RampAscent => "ramp_ascent",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub mass: f64,
    /// Edge lengths.
    pub size: Vector3<f64>,
    pub initial_pose: Isometry3<f64>,
    /// Docking socket on the +x face, box frame. The head tip mates here.
    pub socket: Vector3<f64>,
}

impl BoxSpec {
    pub fn half_extents(&self) -> Vector3<f64> {
        0.5 * self.size
    }

    /// Principal inertia of a solid cuboid.
    pub fn inertia_diag(&self) -> Vector3<f64> {
        let s = self.size.component_mul(&self.size);
        self.mass / 12.0 * Vector3::new(s.y + s.z, s.x + s.z, s.x + s.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub angle_deg: f64,
    pub max_elevation: f64,
    /// Ground point at the centre of the low edge.
    pub foot: Vector3<f64>,
    /// Ascent direction, degrees about +z from world +x.
    pub heading_deg: f64,
    pub width: f64,
}

impl RampSpec {
    pub fn run(&self) -> f64 {
        self.max_elevation / self.angle_deg.to_radians().tan()
    }

    /// Triangular prism: bottom on the ground, sloped top, vertical back face.
    pub fn polytope(&self) -> ConvexPolytope {
        let theta = self.angle_deg.to_radians();
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.heading_deg.to_radians());
        let run = self.run();
        let hw = 0.5 * self.width;
        let local_planes = [
            (Vector3::new(0.0, 0.0, -1.0), 0.0),
            (Vector3::new(-theta.sin(), 0.0, theta.cos()), 0.0),
            (Vector3::new(1.0, 0.0, 0.0), run),
            (Vector3::new(0.0, 1.0, 0.0), hw),
            (Vector3::new(0.0, -1.0, 0.0), hw),
        ];
        let planes = local_planes
            .iter()
            .map(|(n, off)| {
                let nw = rot * n;
                Plane {
                    normal: nw,
                    offset: off + nw.dot(&self.foot),
                }
            })
            .collect();
        let local_vertices = [
            Vector3::new(0.0, -hw, 0.0),
            Vector3::new(0.0, hw, 0.0),
            Vector3::new(run, -hw, 0.0),
            Vector3::new(run, hw, 0.0),
            Vector3::new(run, -hw, self.max_elevation),
            Vector3::new(run, hw, self.max_elevation),
        ];
        let vertices = local_vertices.iter().map(|v| self.foot + rot * v).collect();
        ConvexPolytope { planes, vertices }
    }
}

/// Environment: gravity, the movable box, fixed terrain and contact materials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Magnitude of gravity acting along −z.
    pub gravity: f64,
    pub box_spec: BoxSpec,
    pub platform: Option<Cuboid>,
    pub ramp: Option<RampSpec>,
    pub contact: ContactParams,
    /// Initial head (base) frame pose of the robot.
    pub robot_start: Isometry3<f64>,
}

pub const PLATFORM_HEIGHT: f64 = 0.3;
pub const RAMP_ANGLE_DEG: f64 = 16.7;
pub const RAMP_MAX_ELEVATION: f64 = 0.6;
pub const GRAVITY: f64 = 9.8;
pub const BOX_MASS: f64 = 0.5;
pub const BOX_EDGE: f64 = 0.2;

impl SceneSpec {
    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    /// Fixed obstacles other than the ground plane. Their bottom faces rest on
    /// the ground and are dropped, so points inside resolve to a side or top
    /// face rather than being pushed into the ground.
    pub fn obstacles(&self) -> Vec<(crate::contact::Body, ConvexPolytope)> {
        let mut out = Vec::new();
        if let Some(p) = &self.platform {
            out.push((crate::contact::Body::Platform, p.to_polytope()));
        }
        if let Some(r) = &self.ramp {
            out.push((crate::contact::Body::Ramp, r.polytope()));
        }
        for (_, poly) in &mut out {
            poly.planes.retain(|pl| !(pl.normal.z < -1.0 + 1e-12 && pl.offset.abs() < 1e-12));
        }
        out
    }

    /// Box pose that mates the socket with the head tip of a robot whose head
    /// frame is `head`.
    pub fn docked_box_pose(&self, head: &Isometry3<f64>) -> Isometry3<f64> {
        head * self.docking_transform()
    }

    /// Head-frame → box-frame transform when docked: box axes parallel to the
    /// head axes and the socket at the head tip.
    pub fn docking_transform(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(-self.box_spec.socket),
            UnitQuaternion::identity(),
        )
    }

    /// Scene layout for one of the named scenarios.
    pub fn for_scenario(model: &RobotModel, scenario: ScenarioName) -> Self {
        crate::scenario::scene(model, scenario)
    }
}

/// Generalized coordinates and velocities of the robot and the box.
///
/// Velocity layout: base linear (world, at head frame origin), base angular
/// (world), 11 joint rates, box linear (world, at COM), box angular (world).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joint_angles: JointVector,
    pub box_position: Vector3<f64>,
    pub box_orientation: UnitQuaternion<f64>,
    pub velocity: GenVector,
    pub latched: bool,
    /// Head-frame → box-frame transform held while latched.
    pub dock: Option<Isometry3<f64>>,
}

impl SystemState {
    pub fn base_pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.base_position.into(), self.base_orientation)
    }

    pub fn box_pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.box_position.into(), self.box_orientation)
    }

    pub fn joint_rates(&self) -> JointVector {
        let mut out = [0.0; NUM_JOINTS];
        out.copy_from_slice(self.velocity.fixed_rows::<NUM_JOINTS>(JOINT_RATES).as_slice());
        out
    }

    pub fn box_linear_velocity(&self) -> Vector3<f64> {
        self.velocity.fixed_rows::<3>(BOX_LINEAR).into_owned()
    }

    pub fn box_angular_velocity(&self) -> Vector3<f64> {
        self.velocity.fixed_rows::<3>(BOX_ANGULAR).into_owned()
    }

    /// First non-finite coordinate in position-then-velocity order.
    pub fn first_non_finite(&self) -> Option<usize> {
        let positions = self
            .base_position
            .iter()
            .chain(self.base_orientation.coords.iter())
            .chain(self.joint_angles.iter())
            .chain(self.box_position.iter())
            .chain(self.box_orientation.coords.iter());
        let n_pos = 3 + 4 + NUM_JOINTS + 3 + 4;
        positions
            .chain(self.velocity.iter())
            .position(|v| !v.is_finite())
            .map(|i| if i < n_pos { i } else { i - n_pos })
            .or_else(|| (!self.t.is_finite()).then_some(0))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(coordinate) => Err(Error::NonFiniteState { coordinate }),
            None => Ok(()),
        }
    }

    /// Advance positions by `dt` along generalized velocity `u` (q ⊕ dt·u).
    pub fn integrate_positions(&mut self, u: &GenVector, dt: f64) {
        self.base_position += u.fixed_rows::<3>(BASE_LINEAR) * dt;
        let w = u.fixed_rows::<3>(BASE_ANGULAR) * dt;
        self.base_orientation = UnitQuaternion::from_scaled_axis(w) * self.base_orientation;
        for (k, q) in self.joint_angles.iter_mut().enumerate() {
            *q += u[JOINT_RATES + k] * dt;
        }
        self.box_position += u.fixed_rows::<3>(BOX_LINEAR) * dt;
        let w = u.fixed_rows::<3>(BOX_ANGULAR) * dt;
        self.box_orientation = UnitQuaternion::from_scaled_axis(w) * self.box_orientation;
    }

    pub fn renormalize(&mut self) {
        self.base_orientation.renormalize();
        self.box_orientation.renormalize();
    }

    /// While latched, place the box rigidly on the head and give it the head's
    /// rigid-body velocity.
    pub fn slave_box(&mut self) {
        let Some(dock) = self.dock.filter(|_| self.latched) else {
            return;
        };
        let pose = self.base_pose() * dock;
        self.box_position = pose.translation.vector;
        self.box_orientation = pose.rotation;
        let v0: Vector3<f64> = self.velocity.fixed_rows::<3>(BASE_LINEAR).into_owned();
        let w0: Vector3<f64> = self.velocity.fixed_rows::<3>(BASE_ANGULAR).into_owned();
        let v_box = v0 + w0.cross(&(self.box_position - self.base_position));
        self.velocity.fixed_rows_mut::<3>(BOX_LINEAR).copy_from(&v_box);
        self.velocity.fixed_rows_mut::<3>(BOX_ANGULAR).copy_from(&w0);
    }

    /// Weld the box to the head at its current relative pose.
    pub fn engage_latch(&mut self) {
        let rel = self.base_pose().inverse() * self.box_pose();
        self.dock = Some(rel);
        self.latched = true;
        self.slave_box();
    }

    /// Free the box; it keeps its current rigid-body velocity.
    pub fn release_latch(&mut self) {
        self.latched = false;
        self.dock = None;
    }
}

/// Straight robot at rest with the box placed per scenario.
pub fn initial_pose(model: &RobotModel, scene: &SceneSpec, scenario: ScenarioName) -> SystemState {
    let _ = model;
    let base = scene.robot_start;
    let mut state = SystemState {
        t: 0.0,
        base_position: base.translation.vector,
        base_orientation: base.rotation,
        joint_angles: [0.0; NUM_JOINTS],
        box_position: scene.box_spec.initial_pose.translation.vector,
        box_orientation: scene.box_spec.initial_pose.rotation,
        velocity: GenVector::zeros(),
        latched: false,
        dock: None,
    };
    if scenario == ScenarioName::LiftPlace {
        state.dock = Some(scene.docking_transform());
        state.latched = true;
        state.slave_box();
    }
    state
}

/// Parses a scenario name and builds its initial state.
pub fn initial_pose_named(model: &RobotModel, scenario: &str) -> Result<(SceneSpec, SystemState)> {
    let name: ScenarioName = scenario.parse()?;
    let scene = SceneSpec::for_scenario(model, name);
    let state = initial_pose(model, &scene, name);
    Ok((scene, state))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, path: &str) -> bool {
        self.violations.iter().any(|v| v.path == path)
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Check every model and scene invariant; an empty report means valid.
pub fn validate(model: &RobotModel, scene: &SceneSpec) -> ValidationReport {
    let mut r = ValidationReport::default();
    if model.links.len() != NUM_LINKS {
        r.push("links", format!("expected {NUM_LINKS} links, found {}", model.links.len()));
    }
    if model.joints.len() != NUM_JOINTS {
        r.push("joints", format!("expected {NUM_JOINTS} joints, found {}", model.joints.len()));
    }
    for (i, l) in model.links.iter().enumerate() {
        if !(l.mass > 0.0) {
            r.push(format!("links[{i}].mass"), format!("mass must be positive, got {}", l.mass));
        }
        for (a, v) in l.inertia_diag.iter().enumerate() {
            if !(*v > 0.0) {
                r.push(format!("links[{i}].inertia_diag[{a}]"), format!("inertia must be positive, got {v}"));
            }
        }
        if !(l.length > 0.0) {
            r.push(format!("links[{i}].length"), "length must be positive");
        }
        if !(l.shape.radius > 0.0) || l.shape.half_length < 0.0 {
            r.push(format!("links[{i}].shape"), "capsule radius must be positive and half-length non-negative");
        }
    }
    for (k, j) in model.joints.iter().enumerate() {
        if !(j.position_limit > 0.0) {
            r.push(format!("joints[{k}].position_limit"), "limit must be positive");
        }
        if !(j.torque_limit > 0.0) {
            r.push(format!("joints[{k}].torque_limit"), "limit must be positive");
        }
        if j.internal_stiffness < 0.0 || j.internal_damping < 0.0 {
            r.push(format!("joints[{k}].gains"), "gains must be non-negative");
        }
        if k > 0 && model.joints[k - 1].axis == j.axis {
            r.push(format!("joints[{k}].axis"), "joint axes must alternate yaw/pitch");
        }
    }
    let length_sum: f64 = model.links.iter().map(|l| l.length).sum();
    if (length_sum - model.total_length).abs() > 1e-9 {
        r.push("total_length", format!("module lengths sum to {length_sum}, expected {}", model.total_length));
    }
    if !(scene.gravity >= 0.0) {
        r.push("gravity", "gravity magnitude must be non-negative");
    }
    let b = &scene.box_spec;
    if !(b.mass > 0.0) {
        r.push("box.mass", format!("mass must be positive, got {}", b.mass));
    }
    if b.size.iter().any(|s| !(*s > 0.0)) {
        r.push("box.size", "edge lengths must be positive");
    }
    if let Some(p) = &scene.platform {
        if p.half_extents.iter().any(|s| !(*s > 0.0)) {
            r.push("platform", "platform extents must be positive");
        }
    }
    let c = &scene.contact;
    if !(c.normal.k > 0.0) {
        r.push("contact.k", "stiffness must be positive");
    }
    if !(c.normal.b >= 0.0) {
        r.push("contact.b", "damping must be non-negative");
    }
    if !(c.normal.w > 0.0) {
        r.push("contact.w", "transition width must be positive");
    }
    if !(c.friction.mu_d > 0.0) || c.friction.mu_s < c.friction.mu_d {
        r.push("contact.mu", "require mu_s >= mu_d > 0");
    }
    if !(c.friction.v_crit > 0.0) {
        r.push("contact.v_crit", "critical velocity must be positive");
    }
    if let Some(ramp) = &scene.ramp {
        let angle = ramp.angle_deg;
        if !(angle > 0.0 && angle < 90.0) {
            r.push("ramp.angle_deg", "incline must lie in (0, 90) degrees");
        } else if angle.to_radians().tan() >= c.friction.mu_s {
            r.push(
                "ramp.angle_deg",
                format!(
                    "static infeasibility: tan({angle}°) = {:.3} >= mu_s = {}",
                    angle.to_radians().tan(),
                    c.friction.mu_s
                ),
            );
        }
        if !(ramp.max_elevation > 0.0) || !(ramp.width > 0.0) {
            r.push("ramp", "elevation and width must be positive");
        }
    }
    r
}
