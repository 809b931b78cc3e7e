//! Time-stepping rollout: sample references, PD torques, detect, resolve, integrate.

use serde::{Deserialize, Serialize};

use super::qp::{solve_contact_qp, ContactQpProblem, QpSettings};
use crate::contact::{self, delassus, Body, ContactSet};
use crate::dynamics::{self, contact_generalized_force, step_with, IntegratorConfig};
use crate::error::Result;
use crate::gait::{GaitTimeline, LatchCommand, ENGAGE_ANGLE_TOL, ENGAGE_POSITION_TOL};
use crate::kinematics::Kinematics;
use crate::model::{JointVector, RobotModel, SceneSpec, SystemState, BOX_ANGULAR, BOX_LINEAR, JOINT_RATES, NUM_JOINTS};
use crate::trajectory::{ContactRecord, LatchEvent, LatchEventKind, Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMode {
    /// Spring-damper normal force and stick-slip friction.
    Penalty,
    /// Forces from the contact QP on the Delassus system.
    Qp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub integrator: IntegratorConfig,
    pub sample_hz: f64,
    /// Log every integration step instead of decimating.
    pub full_rate: bool,
    pub force_mode: ForceMode,
    /// Contact detection on/off.
    pub contacts: bool,
    /// Keep per-point contact records in the samples.
    pub log_contacts: bool,
    /// Evaluate ½fᵀGf + fᵀc at each sample.
    pub objective: bool,
    pub qp: QpSettings,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            sample_hz: 100.0,
            full_rate: false,
            force_mode: ForceMode::Penalty,
            contacts: true,
            log_contacts: true,
            objective: true,
            qp: QpSettings::default(),
        }
    }
}

impl RolloutConfig {
    fn sample_every(&self) -> u64 {
        if self.full_rate {
            1
        } else {
            ((1.0 / (self.sample_hz * self.integrator.dt)).round() as u64).max(1)
        }
    }
}

/// Position and angle error between the current head→box transform and the
/// nominal docking transform.
pub fn docking_error(scene: &SceneSpec, state: &SystemState) -> (f64, f64) {
    let rel = state.base_pose().inverse() * state.box_pose();
    let dock = scene.docking_transform();
    let dp = (rel.translation.vector - dock.translation.vector).norm();
    let da = rel.rotation.angle_to(&dock.rotation);
    (dp, da)
}

pub fn can_engage(scene: &SceneSpec, state: &SystemState) -> bool {
    let (dp, da) = docking_error(scene, state);
    dp < ENGAGE_POSITION_TOL && da < ENGAGE_ANGLE_TOL
}

/// ½fᵀGf + fᵀc of the forces carried by `set` (which must have Jacobians).
pub fn contact_objective(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
    set: &ContactSet,
) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let terms = dynamics::dynamics_terms(model, scene, state, tau)?;
    let sys = delassus(set, &terms)?;
    Ok(sys.objective(&set.stacked_forces()))
}

fn is_robot_box(p: &contact::ContactPoint) -> bool {
    (p.pair.0 == Body::Box && p.pair.1.is_robot()) || (p.pair.1 == Body::Box && p.pair.0.is_robot())
}

/// Power delivered by robot→box forces at the box material points.
fn box_power(kin: &Kinematics, p: &contact::ContactPoint) -> f64 {
    if !is_robot_box(p) {
        return 0.0;
    }
    contact_power_on_box(kin, p)
}

/// Power of a contact force at the box material point; 0 if the box is not involved.
fn contact_power_on_box(kin: &Kinematics, p: &contact::ContactPoint) -> f64 {
    let f = p.world_force();
    let on_box = if p.pair.1 == Body::Box {
        f
    } else if p.pair.0 == Body::Box {
        -f
    } else {
        return 0.0;
    };
    on_box.dot(&kin.point_velocity(Body::Box, &p.position))
}

/// Kinetic plus gravitational potential energy of the box.
fn box_energy(scene: &SceneSpec, state: &SystemState) -> f64 {
    let b = &scene.box_spec;
    let v = state.velocity.fixed_rows::<3>(BOX_LINEAR).into_owned();
    let w = state.box_orientation.inverse() * state.velocity.fixed_rows::<3>(BOX_ANGULAR).into_owned();
    let inertia = b.inertia_diag();
    0.5 * b.mass * v.norm_squared() + 0.5 * w.dot(&inertia.component_mul(&w)) + b.mass * scene.gravity * state.box_position.z
}

fn resolve_qp(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
    set: &mut ContactSet,
    settings: &QpSettings,
) -> Result<()> {
    if set.is_empty() {
        return Ok(());
    }
    let terms = dynamics::dynamics_terms(model, scene, state, tau)?;
    let system = delassus(set, &terms)?;
    let mu = vec![scene.contact.friction.mu_s; set.len()];
    let sol = solve_contact_qp(&ContactQpProblem { system, mu }, settings)?;
    set.set_stacked_forces(&sol.forces);
    Ok(())
}

struct Running {
    latch_work: f64,
    p_loc: f64,
    p_net: f64,
    p_box: f64,
    effort: f64,
    work_loc: f64,
    work_net: f64,
    work_box: f64,
    effort_int: f64,
    path: f64,
}

/// Simulates `duration` seconds from `initial` following `timeline` (held at
/// its final reference beyond its end).
pub fn rollout(
    model: &RobotModel,
    scene: &SceneSpec,
    initial: &SystemState,
    timeline: &GaitTimeline,
    duration: f64,
    cfg: &RolloutConfig,
) -> Trajectory {
    let dt = cfg.integrator.dt;
    let n_steps = (duration.max(0.0) / dt).round() as u64;
    let every = cfg.sample_every();
    let sampler = timeline.sampler();
    let tl_end = timeline.duration();
    let mu_s = scene.contact.friction.mu_s;

    let mut traj = Trajectory {
        samples: Vec::with_capacity((n_steps / every + 2) as usize),
        dt,
        contacts_logged: cfg.log_contacts,
        latch_events: Vec::new(),
        max_box_height: f64::NEG_INFINITY,
        max_head_height: f64::NEG_INFINITY,
        max_abs_torque: 0.0,
        max_abs_joint_angle: 0.0,
        max_friction_ratio_excess: f64::NEG_INFINITY,
        abort: None,
    };
    let mut state = initial.clone();
    let mut last_segment = None;
    let mut run = Running {
        p_loc: 0.0,
        p_net: 0.0,
        p_box: 0.0,
        effort: 0.0,
        work_loc: 0.0,
        work_net: 0.0,
        work_box: 0.0,
        effort_int: 0.0,
        path: 0.0,
        latch_work: 0.0,
    };
    let mut prev_box = state.box_position;
    // Work through the latch: box energy change less the work of every
    // contact force on the box over each latched step.
    let mut prev_latched = false;
    let mut prev_energy = 0.0;
    let mut prev_contact_power = 0.0;

    for i in 0..=n_steps {
        let t = i as f64 * dt;
        state.t = t;
        let gs = match sampler.sample(t.min(tl_end)) {
            Ok(s) => s,
            Err(e) => {
                traj.abort = Some(e.to_string());
                break;
            }
        };
        if last_segment != Some(gs.segment) {
            if matches!(gs.latch, LatchCommand::Release | LatchCommand::Shake) && state.latched {
                state.release_latch();
                traj.latch_events.push(LatchEvent {
                    t,
                    kind: LatchEventKind::Released,
                });
            }
            last_segment = Some(gs.segment);
        }
        if gs.latch == LatchCommand::Engage && !state.latched && can_engage(scene, &state) {
            state.engage_latch();
            traj.latch_events.push(LatchEvent {
                t,
                kind: LatchEventKind::Engaged,
            });
        }

        let tau = dynamics::joint_pd_torques(model, &state, &gs.q_ref, &gs.qd_ref);
        let kin = Kinematics::new(model, &state);
        let sampling = i % every == 0 || i == n_steps;
        let need_jac = cfg.contacts && ((sampling && cfg.objective) || cfg.force_mode == ForceMode::Qp);
        let mut set = if cfg.contacts {
            contact::detect_with(model, scene, &state, &kin, need_jac)
        } else {
            ContactSet::default()
        };
        match cfg.force_mode {
            ForceMode::Penalty => contact::resolve_in_place(&mut set, &scene.contact),
            ForceMode::Qp => {
                if let Err(e) = resolve_qp(model, scene, &state, &tau, &mut set, &cfg.qp) {
                    traj.abort = Some(e.to_string());
                    break;
                }
            }
        }

        // running power and work
        let mut p_loc = 0.0;
        let mut p_net = 0.0;
        let mut effort = 0.0;
        for k in 0..NUM_JOINTS {
            let p = tau[k] * state.velocity[JOINT_RATES + k];
            p_loc += p.abs();
            p_net += p;
            effort += tau[k] * tau[k];
        }
        let p_net = p_net.abs();
        let p_box: f64 = set.points.iter().map(|p| box_power(&kin, p)).sum();
        let contact_power: f64 = set.points.iter().map(|p| contact_power_on_box(&kin, p)).sum();
        let energy = box_energy(scene, &state);
        if i > 0 && prev_latched {
            let w = energy - prev_energy - 0.5 * (prev_contact_power + contact_power) * dt;
            run.latch_work += w;
            run.work_box += w;
        }
        prev_latched = state.latched;
        prev_energy = energy;
        prev_contact_power = contact_power;
        if i > 0 {
            run.work_loc += 0.5 * (run.p_loc + p_loc) * dt;
            run.work_net += 0.5 * (run.p_net + p_net) * dt;
            run.work_box += 0.5 * (run.p_box + p_box) * dt;
            run.effort_int += 0.5 * (run.effort + effort) * dt;
            run.path += (state.box_position - prev_box).norm();
        }
        prev_box = state.box_position;
        run.p_loc = p_loc;
        run.p_net = p_net;
        run.p_box = p_box;
        run.effort = effort;

        traj.max_box_height = traj.max_box_height.max(state.box_position.z);
        traj.max_head_height = traj.max_head_height.max(state.base_position.z);
        for k in 0..NUM_JOINTS {
            traj.max_abs_torque = traj.max_abs_torque.max(tau[k].abs());
            traj.max_abs_joint_angle = traj.max_abs_joint_angle.max(state.joint_angles[k].abs());
        }
        for p in &set.points {
            let excess = p.friction_force.norm() - mu_s * p.normal_force;
            traj.max_friction_ratio_excess = traj.max_friction_ratio_excess.max(excess);
        }

        if sampling {
            let (objective, manipulation) = if cfg.objective && cfg.contacts {
                let full = contact_objective(model, scene, &state, &tau, &set);
                let sub = ContactSet {
                    points: set.points.iter().filter(|p| is_robot_box(p)).cloned().collect(),
                };
                let part = contact_objective(model, scene, &state, &tau, &sub);
                match (full, part) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        traj.abort = Some(e.to_string());
                        break;
                    }
                }
            } else {
                (0.0, 0.0)
            };
            let contacts = if cfg.log_contacts {
                set.points
                    .iter()
                    .map(|p| ContactRecord::from_point(p, box_power(&kin, p)))
                    .collect()
            } else {
                Vec::new()
            };
            traj.samples.push(Sample {
                state: state.clone(),
                q_ref: gs.q_ref,
                tau,
                contacts,
                contact_objective: objective,
                manipulation_objective: manipulation,
                power: p_loc,
                work_loc: run.work_loc,
                work_loc_net: run.work_net,
                work_box: run.work_box,
                box_path: run.path,
                effort: run.effort_int,
                latch_work: run.latch_work,
            });
        }
        if i == n_steps {
            break;
        }
        let external = contact_generalized_force(&kin, &set);
        match step_with(model, scene, &state, &kin, &tau, &external, &cfg.integrator, i) {
            Ok(next) => state = next,
            Err(e) => {
                traj.abort = Some(e.to_string());
                break;
            }
        }
    }
    if traj.max_friction_ratio_excess == f64::NEG_INFINITY {
        traj.max_friction_ratio_excess = 0.0;
    }
    traj
}

