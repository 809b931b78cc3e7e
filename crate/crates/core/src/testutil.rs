//! Random reachable states for property tests.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    build_default_robot, GenVector, RobotModel, ScenarioName, SceneSpec, SystemState, NUM_JOINTS, NV,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn default_setup() -> (RobotModel, SceneSpec) {
    let m = build_default_robot();
    let s = SceneSpec::for_scenario(&m, ScenarioName::FlatPush);
    (m, s)
}

fn random_rotation(r: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let axis = Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    UnitQuaternion::from_scaled_axis(axis * r.gen_range(0.0..3.0))
}

/// Joint angles within the limits, arbitrary base and box poses, bounded
/// velocities; latched with probability `p_latched`.
pub fn random_state(r: &mut ChaCha8Rng, scene: &SceneSpec, p_latched: f64) -> SystemState {
    let mut joints = [0.0; NUM_JOINTS];
    for q in &mut joints {
        *q = r.gen_range(-1.5..1.5);
    }
    let mut velocity = GenVector::zeros();
    for i in 0..NV {
        velocity[i] = r.gen_range(-1.0..1.0);
    }
    let mut s = SystemState {
        t: 0.0,
        base_position: Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(0.0..1.0)),
        base_orientation: random_rotation(r),
        joint_angles: joints,
        box_position: Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(0.0..1.0)),
        box_orientation: random_rotation(r),
        velocity,
        latched: false,
        dock: None,
    };
    if r.gen_bool(p_latched) {
        s.dock = Some(scene.docking_transform());
        s.latched = true;
        s.slave_box();
    }
    s
}
