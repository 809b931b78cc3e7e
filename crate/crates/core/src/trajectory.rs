//! Recorded rollouts: decimated states, torques, contact logs and running work totals.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::{Body, ContactPoint};
use crate::model::{JointVector, SystemState};

/// One logged contact point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub body_a: Body,
    pub body_b: Body,
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub depth: f64,
    pub depth_rate: f64,
    pub normal_force: f64,
    /// Tangential force in the contact frame (t1, t2).
    pub friction_force: Vector2<f64>,
    /// Slip velocity of B relative to A in the contact frame.
    pub tangential_velocity: Vector2<f64>,
    /// Power of the robot→box force at the box material point; 0 for other pairs.
    pub box_power: f64,
}

impl ContactRecord {
    pub fn from_point(p: &ContactPoint, box_power: f64) -> Self {
        Self {
            body_a: p.pair.0,
            body_b: p.pair.1,
            position: p.position,
            normal: p.normal,
            depth: p.depth,
            depth_rate: p.depth_rate,
            normal_force: p.normal_force,
            friction_force: p.friction_force,
            tangential_velocity: p.tangential_velocity,
            box_power,
        }
    }

    pub fn slip_speed(&self) -> f64 {
        self.tangential_velocity.norm()
    }

    pub fn is_robot_box(&self) -> bool {
        (self.body_a == Body::Box && self.body_b.is_robot()) || (self.body_b == Body::Box && self.body_a.is_robot())
    }

    pub fn is_robot_terrain(&self) -> bool {
        (self.body_a.is_terrain() && self.body_b.is_robot()) || (self.body_b.is_terrain() && self.body_a.is_robot())
    }

    pub fn is_box_terrain(&self) -> bool {
        (self.body_a.is_terrain() && self.body_b == Body::Box) || (self.body_b.is_terrain() && self.body_a == Body::Box)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: SystemState,
    pub q_ref: JointVector,
    pub tau: JointVector,
    pub contacts: Vec<ContactRecord>,
    /// ½fᵀGf + fᵀc over all contacts.
    pub contact_objective: f64,
    /// Same objective restricted to robot–box contacts.
    pub manipulation_objective: f64,
    /// Σ|τₖ·q̇ₖ|.
    pub power: f64,
    /// Running integrals, trapezoidal at the integration step.
    pub work_loc: f64,
    /// ∫|Σ τₖ·q̇ₖ| dt.
    pub work_loc_net: f64,
    pub work_box: f64,
    pub box_path: f64,
    pub effort: f64,
    /// Cumulative work done on the box through the latch.
    #[serde(default)]
    pub latch_work: f64,
}

impl Sample {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatchEventKind {
    Engaged,
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatchEvent {
    pub t: f64,
    pub kind: LatchEventKind,
}

/// A rollout record. `abort` holds the diagnostic of a truncated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub contacts_logged: bool,
    pub latch_events: Vec<LatchEvent>,
    /// Extremes over every integration step.
    pub max_box_height: f64,
    pub max_head_height: f64,
    pub max_abs_torque: f64,
    pub max_abs_joint_angle: f64,
    pub max_friction_ratio_excess: f64,
    pub abort: Option<String>,
}

impl Trajectory {
    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn duration(&self) -> f64 {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => b.t() - a.t(),
            _ => 0.0,
        }
    }

    pub fn box_displacement(&self) -> Vector3<f64> {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => b.state.box_position - a.state.box_position,
            _ => Vector3::zeros(),
        }
    }

    /// Displacement of the robot's centre of mass approximated by the mean
    /// of the link frame origins.
    pub fn robot_displacement(&self, model: &crate::model::RobotModel) -> Vector3<f64> {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => robot_com(model, &b.state) - robot_com(model, &a.state),
            _ => Vector3::zeros(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(Sample::t).collect()
    }
}

/// Robot centre of mass.
pub fn robot_com(model: &crate::model::RobotModel, state: &SystemState) -> Vector3<f64> {
    let kin = crate::kinematics::Kinematics::new(model, state);
    let m = model.total_mass();
    model
        .links
        .iter()
        .zip(&kin.links)
        .map(|(l, f)| f.com * l.mass)
        .sum::<Vector3<f64>>()
        / m
}
