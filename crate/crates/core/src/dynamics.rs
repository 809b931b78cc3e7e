//! Equations of motion M(q)·u̇ = h(q, u, τ) + Σ Jᵢᵀ fᵢ and fixed-step integration.
//!
//! The mass matrix is assembled with the composite-rigid-body algorithm over
//! the chain, with spatial quantities expressed in world axes about the head
//! frame origin. The box contributes an independent 6×6 block, or is folded
//! into the head composite while latched.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::contact::{Body, ContactSet};
use crate::error::{Error, Result};
use crate::kinematics::{BodyFrame, Kinematics, PointJacobian, WrenchAccumulator};
use crate::model::{
    GenVector, JointVector, RobotModel, SceneSpec, SystemState, BASE_ANGULAR, BASE_LINEAR,
    BOX_ANGULAR, BOX_LINEAR, JOINT_RATES, NUM_JOINTS, NUM_LINKS, NV, ROBOT_DOFS,
};

pub type MassMatrix = SMatrix<f64, NV, NV>;

/// Stiffness and damping of the joint end stops, applied beyond ±limit.
const LIMIT_STIFFNESS: f64 = 200.0;
const LIMIT_DAMPING: f64 = 2.0;

/// M and h evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: MassMatrix,
    /// Right-hand side h = −C(q,u)u + gravity + Bτ (+ end-stop torques).
    pub bias: GenVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Quaternion renormalization cadence in steps.
    pub renormalize_every: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            scheme: Scheme::SemiImplicitEuler,
            renormalize_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::Config(format!(
                "integrator.dt must lie in (0, 1e-3] s, got {}",
                self.dt
            )));
        }
        if self.renormalize_every == 0 {
            return Err(Error::Config("integrator.renormalize_every must be >= 1".into()));
        }
        Ok(())
    }
}

fn spatial_inertia(mass: f64, r: &Vector3<f64>, ic: &Matrix3<f64>) -> Matrix6<f64> {
    let rx = r.cross_matrix();
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(ic + mass * rx * rx.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * rx));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(mass * rx.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&(mass * Matrix3::identity()));
    out
}

fn world_inertia(frame: &BodyFrame, diag: &Vector3<f64>) -> Matrix3<f64> {
    frame.rotation * Matrix3::from_diagonal(diag) * frame.rotation.transpose()
}

pub(crate) fn mass_matrix_with(model: &RobotModel, scene: &SceneSpec, kin: &Kinematics) -> MassMatrix {
    let p0 = kin.links[0].origin;
    let mut composite = [Matrix6::zeros(); NUM_LINKS];
    for i in (0..NUM_LINKS).rev() {
        let link = &model.links[i];
        let frame = &kin.links[i];
        let own = spatial_inertia(link.mass, &(frame.com - p0), &world_inertia(frame, &link.inertia_diag));
        composite[i] = if i + 1 < NUM_LINKS { own + composite[i + 1] } else { own };
    }
    let box_spec = &scene.box_spec;
    let box_ic = world_inertia(&kin.box_frame, &box_spec.inertia_diag());
    if kin.box_latched {
        let own = spatial_inertia(box_spec.mass, &(kin.box_frame.com - p0), &box_ic);
        for c in composite.iter_mut().take(1) {
            *c += own;
        }
    }

    let mut motion = [Vector6::zeros(); ROBOT_DOFS];
    let mut subtree = [0usize; ROBOT_DOFS];
    for a in 0..3 {
        motion[BASE_LINEAR + a][3 + a] = 1.0;
        motion[BASE_ANGULAR + a][a] = 1.0;
    }
    for k in 0..NUM_JOINTS {
        let axis = kin.joint_axes[k];
        let lin = (kin.joint_origins[k] - p0).cross(&axis);
        motion[JOINT_RATES + k] = Vector6::new(axis.x, axis.y, axis.z, lin.x, lin.y, lin.z);
        subtree[JOINT_RATES + k] = k + 1;
    }

    let mut m = MassMatrix::zeros();
    for b in 0..ROBOT_DOFS {
        let force = composite[subtree[b]] * motion[b];
        for a in 0..=b {
            // subtree[a] <= subtree[b] for a <= b along the chain
            let v = motion[a].dot(&force);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    if kin.box_latched {
        m.fixed_view_mut::<6, 6>(BOX_LINEAR, BOX_LINEAR).fill_with_identity();
    } else {
        m.fixed_view_mut::<3, 3>(BOX_LINEAR, BOX_LINEAR)
            .copy_from(&(box_spec.mass * Matrix3::identity()));
        m.fixed_view_mut::<3, 3>(BOX_ANGULAR, BOX_ANGULAR).copy_from(&box_ic);
    }
    m
}

/// Gravity, velocity-product and end-stop generalized forces plus Bτ.
pub(crate) fn bias_with(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    kin: &Kinematics,
    tau: &JointVector,
) -> GenVector {
    let g = scene.gravity_vector();
    let mut acc = WrenchAccumulator::default();
    for (i, link) in model.links.iter().enumerate() {
        let frame = &kin.links[i];
        let ic = world_inertia(frame, &link.inertia_diag);
        let f = link.mass * (g - frame.point_bias_acceleration(&frame.com));
        let n = -(ic * frame.bias_alpha + frame.omega.cross(&(ic * frame.omega)));
        acc.add(kin, Body::Link(i), &frame.com, &f, &n);
    }
    let bf = &kin.box_frame;
    let box_spec = &scene.box_spec;
    let ic = world_inertia(bf, &box_spec.inertia_diag());
    let f = box_spec.mass * (g - bf.point_bias_acceleration(&bf.com));
    let n = -(ic * bf.bias_alpha + bf.omega.cross(&(ic * bf.omega)));
    acc.add(kin, Body::Box, &bf.com, &f, &n);

    let mut h = acc.generalized(kin);
    for k in 0..NUM_JOINTS {
        h[JOINT_RATES + k] += tau[k] + end_stop_torque(model, state, k);
    }
    h
}

fn end_stop_torque(model: &RobotModel, state: &SystemState, k: usize) -> f64 {
    let limit = model.joints[k].position_limit;
    let q = state.joint_angles[k];
    let rate = state.velocity[JOINT_RATES + k];
    if q > limit {
        -LIMIT_STIFFNESS * (q - limit) - LIMIT_DAMPING * rate.max(0.0)
    } else if q < -limit {
        -LIMIT_STIFFNESS * (q + limit) - LIMIT_DAMPING * rate.min(0.0)
    } else {
        0.0
    }
}

fn check_torques(model: &RobotModel, tau: &JointVector) -> Result<()> {
    for (k, (t, j)) in tau.iter().zip(&model.joints).enumerate() {
        if !t.is_finite() || t.abs() > j.torque_limit * (1.0 + 1e-12) {
            return Err(Error::TorqueLimit {
                joint: k + 1,
                torque: *t,
                limit: j.torque_limit,
            });
        }
    }
    Ok(())
}

/// Mass-inertia matrix at `state`.
pub fn mass_matrix(model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> Result<MassMatrix> {
    state.check_finite()?;
    let kin = Kinematics::new(model, state);
    Ok(mass_matrix_with(model, scene, &kin))
}

/// Generalized force vector h(q, u, τ); reduces to gravity at rest with τ = 0.
pub fn bias_forces(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
) -> Result<GenVector> {
    state.check_finite()?;
    check_torques(model, tau)?;
    let kin = Kinematics::new(model, state);
    Ok(bias_with(model, scene, state, &kin, tau))
}

pub fn dynamics_terms(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
) -> Result<DynamicsTerms> {
    state.check_finite()?;
    check_torques(model, tau)?;
    let kin = Kinematics::new(model, state);
    Ok(DynamicsTerms {
        mass: mass_matrix_with(model, scene, &kin),
        bias: bias_with(model, scene, state, &kin, tau),
    })
}

/// Jacobian of the material point `local_point` (body frame) on `body`.
pub fn point_jacobian(
    model: &RobotModel,
    state: &SystemState,
    body: Body,
    local_point: &Vector3<f64>,
) -> Result<PointJacobian> {
    let kin = Kinematics::new(model, state);
    let frame = kin
        .frame(body)
        .ok_or_else(|| Error::InvalidInput(format!("no movable body `{body}`")))?;
    let x = frame.to_world(local_point);
    Ok(kin.point_jacobian(body, &x))
}

/// Clamped PD servo torques toward `q_ref`, `qd_ref` (references clamped to the joint limits).
pub fn joint_pd_torques(
    model: &RobotModel,
    state: &SystemState,
    q_ref: &JointVector,
    qd_ref: &JointVector,
) -> JointVector {
    let mut tau = [0.0; NUM_JOINTS];
    for (k, j) in model.joints.iter().enumerate() {
        let target = q_ref[k].clamp(-j.position_limit, j.position_limit);
        let raw = j.internal_stiffness * (target - state.joint_angles[k])
            + j.internal_damping * (qd_ref[k] - state.velocity[JOINT_RATES + k]);
        tau[k] = raw.clamp(-j.torque_limit, j.torque_limit);
    }
    tau
}

fn accelerations(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
    external: &GenVector,
) -> Result<GenVector> {
    let kin = Kinematics::new(model, state);
    let m = mass_matrix_with(model, scene, &kin);
    let rhs = bias_with(model, scene, state, &kin, tau) + external;
    solve_accelerations(&m, &rhs, kin.box_latched)
}

fn solve_accelerations(m: &MassMatrix, rhs: &GenVector, latched: bool) -> Result<GenVector> {
    let chol = m.cholesky().ok_or(Error::SingularMassMatrix)?;
    let mut udot = chol.solve(rhs);
    if latched {
        udot.fixed_rows_mut::<6>(BOX_LINEAR).fill(0.0);
    }
    if let Some(coordinate) = udot.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteAcceleration { coordinate });
    }
    Ok(udot)
}

/// Generalized force of the resolved contact forces at `state`.
pub fn contact_generalized_force(kin: &Kinematics, contacts: &ContactSet) -> GenVector {
    let mut acc = WrenchAccumulator::default();
    contacts.apply(kin, &mut acc);
    acc.generalized(kin)
}

/// Advances the state by one step under torques `tau` and the resolved
/// contact forces in `contacts`, which are held fixed over the step.
pub fn step(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    tau: &JointVector,
    contacts: &ContactSet,
    cfg: &IntegratorConfig,
) -> Result<SystemState> {
    check_torques(model, tau)?;
    let kin = Kinematics::new(model, state);
    let external = contact_generalized_force(&kin, contacts);
    step_with(model, scene, state, &kin, tau, &external, cfg, 0)
}

/// Step with a precomputed kinematic snapshot and external generalized force.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_with(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    kin: &Kinematics,
    tau: &JointVector,
    external: &GenVector,
    cfg: &IntegratorConfig,
    step_index: u64,
) -> Result<SystemState> {
    let dt = cfg.dt;
    let mut next = state.clone();
    match cfg.scheme {
        Scheme::SemiImplicitEuler => {
            let m = mass_matrix_with(model, scene, kin);
            let rhs = bias_with(model, scene, state, kin, tau) + external;
            let udot = solve_accelerations(&m, &rhs, kin.box_latched)?;
            let momentum_before = m * state.velocity;
            next.velocity += udot * dt;
            let u = next.velocity;
            next.integrate_positions(&u, dt);
            next.slave_box();
            balance_momentum(model, scene, state, kin, &momentum_before, external, &mut next, dt)?;
        }
        Scheme::Rk4 => {
            let stage = |base: &SystemState, u: &GenVector, a: &GenVector, h: f64| {
                let mut s = base.clone();
                s.velocity = u + a * h;
                let v = s.velocity;
                let mut moved = base.clone();
                moved.integrate_positions(&(0.5 * (u + v)), h);
                moved.velocity = v;
                moved.slave_box();
                moved
            };
            let u1 = state.velocity;
            let a1 = accelerations(model, scene, state, tau, external)?;
            let s2 = stage(state, &u1, &a1, 0.5 * dt);
            let u2 = s2.velocity;
            let a2 = accelerations(model, scene, &s2, tau, external)?;
            let s3 = stage(state, &u1, &a2, 0.5 * dt);
            let u3 = s3.velocity;
            let a3 = accelerations(model, scene, &s3, tau, external)?;
            let s4 = stage(state, &u1, &a3, dt);
            let u4 = s4.velocity;
            let a4 = accelerations(model, scene, &s4, tau, external)?;
            let u_mean = (u1 + 2.0 * u2 + 2.0 * u3 + u4) / 6.0;
            let a_mean = (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0;
            next.velocity = u1 + a_mean * dt;
            next.integrate_positions(&u_mean, dt);
        }
    }
    next.t = state.t + dt;
    if (step_index + 1) % u64::from(cfg.renormalize_every) == 0 {
        next.renormalize();
    }
    next.slave_box();
    next.check_finite()?;
    Ok(next)
}

/// Gravity force on the robot (with a latched box) and its moment about the
/// head frame origin.
fn gravity_wrench(model: &RobotModel, scene: &SceneSpec, kin: &Kinematics) -> (Vector3<f64>, Vector3<f64>) {
    let g = scene.gravity_vector();
    let p0 = kin.links[0].origin;
    let mut f = Vector3::zeros();
    let mut n = Vector3::zeros();
    let mut add = |mass: f64, com: &Vector3<f64>| {
        f += mass * g;
        n += (com - p0).cross(&(mass * g));
    };
    for (l, frame) in model.links.iter().zip(&kin.links) {
        add(l.mass, &frame.com);
    }
    if kin.box_latched {
        add(scene.box_spec.mass, &kin.box_frame.com);
    }
    (f, n)
}

/// Replaces the step's base and box velocities so that the total linear and
/// angular momentum change by exactly the external impulse over the step.
/// Plain semi-implicit Euler drifts at O(dt) here because the momentum map
/// M(q) moves with the configuration.
#[allow(clippy::too_many_arguments)]
fn balance_momentum(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    kin: &Kinematics,
    momentum_before: &GenVector,
    external: &GenVector,
    next: &mut SystemState,
    dt: f64,
) -> Result<()> {
    let p0 = kin.links[0].origin;
    let (fg, ng) = gravity_wrench(model, scene, kin);
    let force = fg + external.fixed_rows::<3>(BASE_LINEAR);
    let moment = ng + external.fixed_rows::<3>(BASE_ANGULAR);
    let p_before: Vector3<f64> = momentum_before.fixed_rows::<3>(BASE_LINEAR).into_owned();
    let l_before = momentum_before.fixed_rows::<3>(BASE_ANGULAR) + p0.cross(&p_before);
    let p_target = p_before + force * dt;
    let l_target = l_before + (moment + p0.cross(&force)) * dt;

    let kin1 = Kinematics::new(model, next);
    let m1 = mass_matrix_with(model, scene, &kin1);
    let now = m1 * next.velocity;
    let p1 = kin1.links[0].origin;
    let mut residual = Vector6::zeros();
    residual
        .fixed_rows_mut::<3>(BASE_LINEAR)
        .copy_from(&(p_target - now.fixed_rows::<3>(BASE_LINEAR)));
    residual
        .fixed_rows_mut::<3>(BASE_ANGULAR)
        .copy_from(&(l_target - p1.cross(&p_target) - now.fixed_rows::<3>(BASE_ANGULAR)));
    let m_bb: Matrix6<f64> = m1.fixed_view::<6, 6>(0, 0).into_owned();
    let delta = m_bb.cholesky().ok_or(Error::SingularMassMatrix)?.solve(&residual);
    for a in 0..6 {
        next.velocity[a] += delta[a];
    }

    if !kin.box_latched {
        let diag = scene.box_spec.inertia_diag();
        let l_box = world_inertia(&kin.box_frame, &diag) * state.box_angular_velocity()
            + external.fixed_rows::<3>(BOX_ANGULAR) * dt;
        let i1 = world_inertia(&kin1.box_frame, &diag);
        let w = i1.cholesky().ok_or(Error::SingularMassMatrix)?.solve(&l_box);
        next.velocity.fixed_rows_mut::<3>(BOX_ANGULAR).copy_from(&w);
    }
    next.slave_box();
    Ok(())
}

/// Total kinetic energy ½ uᵀ M u.
pub fn kinetic_energy(model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> f64 {
    let kin = Kinematics::new(model, state);
    let m = mass_matrix_with(model, scene, &kin);
    let mut u = state.velocity;
    if kin.box_latched {
        u.fixed_rows_mut::<6>(BOX_LINEAR).fill(0.0);
    }
    0.5 * u.dot(&(m * u))
}

/// Gravitational potential energy Σ m g z.
pub fn potential_energy(model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> f64 {
    let kin = Kinematics::new(model, state);
    let robot: f64 = model
        .links
        .iter()
        .zip(&kin.links)
        .map(|(l, f)| l.mass * f.com.z)
        .sum();
    scene.gravity * (robot + scene.box_spec.mass * kin.box_frame.com.z)
}

/// Linear and angular momentum of robot + box about the world origin.
pub fn momentum(model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> (Vector3<f64>, Vector3<f64>) {
    let kin = Kinematics::new(model, state);
    let mut p = Vector3::zeros();
    let mut l = Vector3::zeros();
    for (link, f) in model.links.iter().zip(&kin.links) {
        let v = f.point_velocity(&f.com);
        let ic = world_inertia(f, &link.inertia_diag);
        p += link.mass * v;
        l += f.com.cross(&(link.mass * v)) + ic * f.omega;
    }
    let bf = &kin.box_frame;
    let v = bf.point_velocity(&bf.com);
    let ic = world_inertia(bf, &scene.box_spec.inertia_diag());
    p += scene.box_spec.mass * v;
    l += bf.com.cross(&(scene.box_spec.mass * v)) + ic * bf.omega;
    (p, l)
}
