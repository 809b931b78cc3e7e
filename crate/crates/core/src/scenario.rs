//! Scene layouts for the named scenarios.
//!
//! The robot always starts straight along +x with its head tip at the world
//! origin, resting on the ground. Only the box and the fixed terrain differ.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

use crate::contact::ContactParams;
use crate::geometry::Cuboid;
use crate::model::{
    BoxSpec, RampSpec, RobotModel, ScenarioName, SceneSpec, BOX_EDGE, BOX_MASS, GRAVITY,
    PLATFORM_HEIGHT, RAMP_ANGLE_DEG, RAMP_MAX_ELEVATION,
};

/// Resting penetration of the robot and box at the start.
const ROBOT_SINK: f64 = 4e-4;
const BOX_SINK: f64 = 3.8e-4;

/// Box beside the middle of the body, on the side the pushing gaits travel.
pub const FLAT_PUSH_BOX: [f64; 2] = [0.8, 0.3];

/// Platform footprint centre (x, y) and half extents (x, y).
pub const PLATFORM_CENTER: [f64; 2] = [0.55, 0.4];
pub const PLATFORM_HALF: [f64; 2] = [0.25, 0.22];

/// Box pose the pick keyframes dock with, on a pedestal slightly smaller
/// than the box so the lowered head clears the pedestal top.
pub const PICK_BOX: [f64; 2] = [0.669, -0.443];
pub const PICK_PLATFORM_HALF: [f64; 2] = [0.09, 0.09];
pub const PICK_BOX_YAW: f64 = 1.57;

/// Ramp foot and heading for the ascent scenario.
pub const RAMP_FOOT: [f64; 2] = [0.8, 0.7];
pub const RAMP_HEADING_DEG: f64 = 90.0;
pub const RAMP_WIDTH: f64 = 2.0;

/// Physical constants a run configuration may override.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOverrides {
    pub gravity: f64,
    pub box_mass: f64,
    pub box_size: Vector3<f64>,
    pub platform_height: f64,
    pub ramp_angle_deg: f64,
    pub contact: ContactParams,
    /// Initial box centre (x, y); the height follows from the support below.
    pub box_xy: Option<[f64; 2]>,
}

impl Default for SceneOverrides {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            box_mass: BOX_MASS,
            box_size: Vector3::repeat(BOX_EDGE),
            platform_height: PLATFORM_HEIGHT,
            ramp_angle_deg: RAMP_ANGLE_DEG,
            contact: ContactParams::default(),
            box_xy: None,
        }
    }
}

fn base_box(model: &RobotModel, o: &SceneOverrides) -> BoxSpec {
    let r = model.radius();
    BoxSpec {
        mass: o.box_mass,
        size: o.box_size,
        initial_pose: Isometry3::identity(),
        socket: Vector3::new(0.5 * o.box_size.x, 0.0, -0.5 * o.box_size.z + r),
    }
}

fn box_on_ground(spec: &BoxSpec, x: f64, y: f64) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(x, y, 0.5 * spec.size.z - BOX_SINK),
        UnitQuaternion::identity(),
    )
}

pub fn platform(height: f64) -> Cuboid {
    platform_at(PLATFORM_CENTER, PLATFORM_HALF, height)
}

/// Pedestal the pick maneuvers start from, on the −y side of the body.
pub fn pick_platform(height: f64) -> Cuboid {
    platform_at(PICK_BOX, PICK_PLATFORM_HALF, height)
}

fn platform_at(center: [f64; 2], half: [f64; 2], height: f64) -> Cuboid {
    Cuboid::axis_aligned(
        Vector3::new(center[0], center[1], 0.5 * height),
        Vector3::new(half[0], half[1], 0.5 * height),
    )
}

pub fn ramp(angle_deg: f64) -> RampSpec {
    RampSpec {
        angle_deg,
        max_elevation: RAMP_MAX_ELEVATION,
        foot: Vector3::new(RAMP_FOOT[0], RAMP_FOOT[1], 0.0),
        heading_deg: RAMP_HEADING_DEG,
        width: RAMP_WIDTH,
    }
}

/// Default scene for a scenario.
pub fn scene(model: &RobotModel, scenario: ScenarioName) -> SceneSpec {
    scene_with(model, scenario, &SceneOverrides::default())
}

pub fn scene_with(model: &RobotModel, scenario: ScenarioName, o: &SceneOverrides) -> SceneSpec {
    let r = model.radius();
    let robot_start = Isometry3::from_parts(
        Translation3::new(0.0, 0.0, r - ROBOT_SINK),
        UnitQuaternion::identity(),
    );
    let mut box_spec = base_box(model, o);
    let mut scene = SceneSpec {
        gravity: o.gravity,
        box_spec: box_spec.clone(),
        platform: None,
        ramp: None,
        contact: o.contact,
        robot_start,
    };
    match scenario {
        ScenarioName::FlatPush => {
            let [x, y] = o.box_xy.unwrap_or(FLAT_PUSH_BOX);
            box_spec.initial_pose = box_on_ground(&box_spec, x, y);
        }
        ScenarioName::LiftPlace => {
            box_spec.initial_pose = scene.docked_box_pose(&robot_start);
            box_spec.initial_pose.translation.vector.z = 0.5 * box_spec.size.z - BOX_SINK;
            if let Some([x, y]) = o.box_xy {
                box_spec.initial_pose = box_on_ground(&box_spec, x, y);
            }
            scene.platform = Some(platform(o.platform_height));
        }
        ScenarioName::PickPlace | ScenarioName::RampAscent => {
            let [x, y] = o.box_xy.unwrap_or(PICK_BOX);
            box_spec.initial_pose = Isometry3::from_parts(
                Translation3::new(x, y, o.platform_height + 0.5 * box_spec.size.z - BOX_SINK),
                UnitQuaternion::from_euler_angles(0.0, 0.0, PICK_BOX_YAW),
            );
            scene.platform = Some(pick_platform(o.platform_height));
            if scenario == ScenarioName::RampAscent {
                scene.ramp = Some(ramp(o.ramp_angle_deg));
            }
        }
    }
    scene.box_spec = box_spec;
    scene
}
