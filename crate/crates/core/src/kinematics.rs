//! Forward kinematics, point velocities and point Jacobians of the chain and box.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::contact::Body;
use crate::model::{
    GenVector, RobotModel, SystemState, BASE_ANGULAR, BASE_LINEAR, BOX_ANGULAR,
    BOX_LINEAR, JOINT_RATES, NUM_JOINTS, NUM_LINKS, NV,
};

/// 3×NV map from generalized velocity to a world-frame 3-vector.
pub type PointJacobian = SMatrix<f64, 3, NV>;

/// World pose and motion of one rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame {
    pub rotation: Matrix3<f64>,
    /// Frame origin (link: head-side interface; box: COM).
    pub origin: Vector3<f64>,
    pub com: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub origin_velocity: Vector3<f64>,
    /// Velocity-product (zero generalized acceleration) terms.
    pub origin_bias_acc: Vector3<f64>,
    pub bias_alpha: Vector3<f64>,
}

impl BodyFrame {
    pub fn point_velocity(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.origin_velocity + self.omega.cross(&(x - self.origin))
    }

    /// Acceleration of a material point when all generalized accelerations vanish.
    pub fn point_bias_acceleration(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let r = x - self.origin;
        self.origin_bias_acc + self.bias_alpha.cross(&r) + self.omega.cross(&self.omega.cross(&r))
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.origin + self.rotation * local
    }
}

/// Kinematic snapshot of the whole system at one state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub links: [BodyFrame; NUM_LINKS],
    pub box_frame: BodyFrame,
    /// World joint axes (J1..J11).
    pub joint_axes: [Vector3<f64>; NUM_JOINTS],
    /// World joint centres, equal to the child link origin.
    pub joint_origins: [Vector3<f64>; NUM_JOINTS],
    pub box_latched: bool,
}

impl Kinematics {
    pub fn new(model: &RobotModel, state: &SystemState) -> Self {
        let u = &state.velocity;
        let base_rot = *state.base_orientation.to_rotation_matrix().matrix();
        let base_omega: Vector3<f64> = u.fixed_rows::<3>(BASE_ANGULAR).into_owned();
        let base = BodyFrame {
            rotation: base_rot,
            origin: state.base_position,
            com: state.base_position + base_rot * model.links[0].com_local(),
            omega: base_omega,
            origin_velocity: u.fixed_rows::<3>(BASE_LINEAR).into_owned(),
            origin_bias_acc: Vector3::zeros(),
            bias_alpha: Vector3::zeros(),
        };
        let mut links = [base; NUM_LINKS];
        let mut joint_axes = [Vector3::zeros(); NUM_JOINTS];
        let mut joint_origins = [Vector3::zeros(); NUM_JOINTS];
        for i in 1..NUM_LINKS {
            let k = i - 1;
            let parent = links[i - 1];
            let joint = &model.joints[k];
            let local_axis = joint.axis.local();
            let origin = parent.to_world(&Vector3::new(model.links[i - 1].length, 0.0, 0.0));
            let axis = parent.rotation * local_axis;
            let rel = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_unchecked(local_axis),
                state.joint_angles[k],
            );
            let rotation = parent.rotation * rel.matrix();
            let rate = u[JOINT_RATES + k];
            let omega = parent.omega + axis * rate;
            let lever = origin - parent.origin;
            let origin_velocity = parent.origin_velocity + parent.omega.cross(&lever);
            let origin_bias_acc = parent.origin_bias_acc
                + parent.bias_alpha.cross(&lever)
                + parent.omega.cross(&parent.omega.cross(&lever));
            let bias_alpha = parent.bias_alpha + parent.omega.cross(&(axis * rate));
            links[i] = BodyFrame {
                rotation,
                origin,
                com: origin + rotation * model.links[i].com_local(),
                omega,
                origin_velocity,
                origin_bias_acc,
                bias_alpha,
            };
            joint_axes[k] = axis;
            joint_origins[k] = origin;
        }
        let box_rot = *state.box_orientation.to_rotation_matrix().matrix();
        let box_latched = state.latched && state.dock.is_some();
        let box_frame = if box_latched {
            let head = links[0];
            let com = state.box_position;
            BodyFrame {
                rotation: box_rot,
                origin: com,
                com,
                omega: head.omega,
                origin_velocity: head.point_velocity(&com),
                origin_bias_acc: head.point_bias_acceleration(&com),
                bias_alpha: head.bias_alpha,
            }
        } else {
            BodyFrame {
                rotation: box_rot,
                origin: state.box_position,
                com: state.box_position,
                omega: u.fixed_rows::<3>(BOX_ANGULAR).into_owned(),
                origin_velocity: u.fixed_rows::<3>(BOX_LINEAR).into_owned(),
                origin_bias_acc: Vector3::zeros(),
                bias_alpha: Vector3::zeros(),
            }
        };
        Self {
            links,
            box_frame,
            joint_axes,
            joint_origins,
            box_latched,
        }
    }

    /// Frame of a movable body; `None` for fixed terrain.
    pub fn frame(&self, body: Body) -> Option<&BodyFrame> {
        match body {
            Body::Link(i) => self.links.get(i),
            Body::Box => Some(&self.box_frame),
            _ => None,
        }
    }

    /// World velocity of a material point; zero on terrain.
    pub fn point_velocity(&self, body: Body, x: &Vector3<f64>) -> Vector3<f64> {
        self.frame(body).map_or_else(Vector3::zeros, |f| f.point_velocity(x))
    }

    pub fn point_bias_acceleration(&self, body: Body, x: &Vector3<f64>) -> Vector3<f64> {
        self.frame(body).map_or_else(Vector3::zeros, |f| f.point_bias_acceleration(x))
    }

    /// Robot link the body is rigidly carried by in the chain sense: the link
    /// itself, or the head for a latched box.
    fn chain_link(&self, body: Body) -> Option<usize> {
        match body {
            Body::Link(i) => Some(i),
            Body::Box if self.box_latched => Some(0),
            _ => None,
        }
    }

    /// Linear-velocity Jacobian of world point `x` attached to `body`.
    pub fn point_jacobian(&self, body: Body, x: &Vector3<f64>) -> PointJacobian {
        let mut j = PointJacobian::zeros();
        if let Some(i) = self.chain_link(body) {
            let r0 = x - self.links[0].origin;
            j.fixed_view_mut::<3, 3>(0, BASE_LINEAR).fill_with_identity();
            j.fixed_view_mut::<3, 3>(0, BASE_ANGULAR).copy_from(&(-r0.cross_matrix()));
            for k in 0..i {
                let col = self.joint_axes[k].cross(&(x - self.joint_origins[k]));
                j.fixed_view_mut::<3, 1>(0, JOINT_RATES + k).copy_from(&col);
            }
        } else if body == Body::Box {
            let r = x - self.box_frame.origin;
            j.fixed_view_mut::<3, 3>(0, BOX_LINEAR).fill_with_identity();
            j.fixed_view_mut::<3, 3>(0, BOX_ANGULAR).copy_from(&(-r.cross_matrix()));
        }
        j
    }

    /// Angular-velocity Jacobian of `body`.
    pub fn angular_jacobian(&self, body: Body) -> PointJacobian {
        let mut j = PointJacobian::zeros();
        if let Some(i) = self.chain_link(body) {
            j.fixed_view_mut::<3, 3>(0, BASE_ANGULAR).fill_with_identity();
            for k in 0..i {
                j.fixed_view_mut::<3, 1>(0, JOINT_RATES + k).copy_from(&self.joint_axes[k]);
            }
        } else if body == Body::Box {
            j.fixed_view_mut::<3, 3>(0, BOX_ANGULAR).fill_with_identity();
        }
        j
    }
}

/// Accumulates world-frame wrenches on bodies and maps them to generalized forces (Jᵀ·F).
#[derive(Debug, Clone)]
pub struct WrenchAccumulator {
    /// Per link: net force and net moment about the base origin.
    force: [Vector3<f64>; NUM_LINKS],
    moment: [Vector3<f64>; NUM_LINKS],
    box_force: Vector3<f64>,
    /// Moment about the box COM.
    box_moment: Vector3<f64>,
}

impl Default for WrenchAccumulator {
    fn default() -> Self {
        Self {
            force: [Vector3::zeros(); NUM_LINKS],
            moment: [Vector3::zeros(); NUM_LINKS],
            box_force: Vector3::zeros(),
            box_moment: Vector3::zeros(),
        }
    }
}

impl WrenchAccumulator {
    /// Force `f` at world point `x` plus free torque `n` on `body`.
    pub fn add(&mut self, kin: &Kinematics, body: Body, x: &Vector3<f64>, f: &Vector3<f64>, n: &Vector3<f64>) {
        let p0 = kin.links[0].origin;
        match body {
            Body::Link(i) => {
                self.force[i] += f;
                self.moment[i] += (x - p0).cross(f) + n;
            }
            Body::Box if kin.box_latched => {
                self.force[0] += f;
                self.moment[0] += (x - p0).cross(f) + n;
            }
            Body::Box => {
                self.box_force += f;
                self.box_moment += (x - kin.box_frame.origin).cross(f) + n;
            }
            _ => {}
        }
    }

    pub fn generalized(&self, kin: &Kinematics) -> GenVector {
        let mut out = GenVector::zeros();
        let p0 = kin.links[0].origin;
        let mut f_sub = Vector3::zeros();
        let mut m_sub = Vector3::zeros();
        for i in (0..NUM_LINKS).rev() {
            f_sub += self.force[i];
            m_sub += self.moment[i];
            if i > 0 {
                let k = i - 1;
                let moment_at_joint = m_sub - (kin.joint_origins[k] - p0).cross(&f_sub);
                out[JOINT_RATES + k] = kin.joint_axes[k].dot(&moment_at_joint);
            }
        }
        out.fixed_rows_mut::<3>(BASE_LINEAR).copy_from(&f_sub);
        out.fixed_rows_mut::<3>(BASE_ANGULAR).copy_from(&m_sub);
        if !kin.box_latched {
            out.fixed_rows_mut::<3>(BOX_LINEAR).copy_from(&self.box_force);
            out.fixed_rows_mut::<3>(BOX_ANGULAR).copy_from(&self.box_moment);
        }
        out
    }
}

/// Link frames of the chain at `state` (positions only).
pub fn forward_kinematics(model: &RobotModel, state: &SystemState) -> Kinematics {
    Kinematics::new(model, state)
}

/// Head tip and tail tip positions in world coordinates.
pub fn chain_tips(model: &RobotModel, kin: &Kinematics) -> (Vector3<f64>, Vector3<f64>) {
    let head = kin.links[0].origin;
    let last = NUM_LINKS - 1;
    let tail = kin.links[last].to_world(&Vector3::new(model.links[last].length, 0.0, 0.0));
    (head, tail)
}
