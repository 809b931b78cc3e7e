//! Contact detection among links, box and terrain; force laws; Delassus system.

mod delassus;
mod law;

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use delassus::{delassus, DelassusSystem};
pub use law::{
    effective_friction_coefficient, friction_force, normal_force, smoothstep, transition,
    FrictionParams, NormalForceParams,
};

use crate::geometry::{query_local_box, segment_closest_params, tangent_basis, PointQuery};
use crate::kinematics::{Kinematics, PointJacobian, WrenchAccumulator};
use crate::model::{RobotModel, SceneSpec, SystemState, NUM_LINKS, NV};

/// Bodies that can take part in a contact pair. Terrain sorts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Ground,
    Platform,
    Ramp,
    Box,
    Link(usize),
}

impl Body {
    pub fn is_robot(self) -> bool {
        matches!(self, Body::Link(_))
    }

    pub fn is_terrain(self) -> bool {
        matches!(self, Body::Ground | Body::Platform | Body::Ramp)
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Ground => f.write_str("ground"),
            Body::Platform => f.write_str("platform"),
            Body::Ramp => f.write_str("ramp"),
            Body::Box => f.write_str("box"),
            Body::Link(0) => f.write_str("head"),
            Body::Link(i) if *i == NUM_LINKS - 1 => f.write_str("tail"),
            Body::Link(i) => write!(f, "L{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub normal: NormalForceParams,
    pub friction: FrictionParams,
    /// Robot self-collision between non-adjacent links.
    pub self_contact: bool,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            normal: NormalForceParams::default(),
            friction: FrictionParams::default(),
            self_contact: false,
        }
    }
}

/// One contact between body `pair.0` (A) and body `pair.1` (B).
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub pair: (Body, Body),
    /// Feature index within the pair (sphere end, corner, vertex).
    pub feature: u16,
    pub position: Vector3<f64>,
    /// Unit normal pointing from A toward B.
    pub normal: Vector3<f64>,
    pub tangents: (Vector3<f64>, Vector3<f64>),
    /// Penetration depth, positive when overlapping.
    pub depth: f64,
    /// Penetration rate, positive when approaching.
    pub depth_rate: f64,
    /// Slip velocity of B relative to A in the (t1, t2) basis.
    pub tangential_velocity: Vector2<f64>,
    /// Rows (n, t1, t2) of (J_B − J_A); filled by [`detect_contacts`].
    pub jacobian: Option<PointJacobian>,
    /// J̇·u in the same rows: relative bias acceleration at the point.
    pub bias_acceleration: Vector3<f64>,
    pub normal_force: f64,
    pub friction_force: Vector2<f64>,
}

impl ContactPoint {
    /// Signed separation g = −depth.
    pub fn gap(&self) -> f64 {
        -self.depth
    }

    /// World-frame force applied to B (its negative acts on A).
    pub fn world_force(&self) -> Vector3<f64> {
        self.normal * self.normal_force
            + self.tangents.0 * self.friction_force.x
            + self.tangents.1 * self.friction_force.y
    }

    /// Contact-frame force (f_N, f_T1, f_T2).
    pub fn local_force(&self) -> Vector3<f64> {
        Vector3::new(self.normal_force, self.friction_force.x, self.friction_force.y)
    }

    pub fn set_local_force(&mut self, f: &Vector3<f64>) {
        self.normal_force = f.x;
        self.friction_force = Vector2::new(f.y, f.z);
    }

    /// Rows n, t1, t2 as a 3×3 matrix.
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[
            self.normal.transpose(),
            self.tangents.0.transpose(),
            self.tangents.1.transpose(),
        ])
    }

    pub fn involves(&self, body: Body) -> bool {
        self.pair.0 == body || self.pair.1 == body
    }
}

/// Ordered contact list for one state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub points: Vec<ContactPoint>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Stacked separations g.
    pub fn gaps(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.points.iter().map(ContactPoint::gap))
    }

    /// Stacked (3m × NV) contact Jacobian Jc. Points without Jacobians give zero rows.
    pub fn stacked_jacobian(&self) -> DMatrix<f64> {
        let mut jc = DMatrix::zeros(3 * self.len(), NV);
        for (i, p) in self.points.iter().enumerate() {
            if let Some(w) = &p.jacobian {
                jc.view_mut((3 * i, 0), (3, NV)).copy_from(w);
            }
        }
        jc
    }

    /// Stacked contact-frame forces (f_N, f_T1, f_T2) per point.
    pub fn stacked_forces(&self) -> DVector<f64> {
        let mut f = DVector::zeros(3 * self.len());
        for (i, p) in self.points.iter().enumerate() {
            f.fixed_rows_mut::<3>(3 * i).copy_from(&p.local_force());
        }
        f
    }

    pub fn set_stacked_forces(&mut self, f: &DVector<f64>) {
        for (i, p) in self.points.iter_mut().enumerate() {
            p.set_local_force(&f.fixed_rows::<3>(3 * i).into_owned());
        }
    }

    /// Stacked contact-space velocities (normal separation rate, slip) = Jc·u.
    pub fn stacked_velocities(&self) -> DVector<f64> {
        let mut v = DVector::zeros(3 * self.len());
        for (i, p) in self.points.iter().enumerate() {
            v[3 * i] = -p.depth_rate;
            v[3 * i + 1] = p.tangential_velocity.x;
            v[3 * i + 2] = p.tangential_velocity.y;
        }
        v
    }

    /// Accumulate every point's equal-and-opposite force pair.
    pub fn apply(&self, kin: &Kinematics, acc: &mut WrenchAccumulator) {
        let zero = Vector3::zeros();
        for p in &self.points {
            let f = p.world_force();
            acc.add(kin, p.pair.1, &p.position, &f, &zero);
            acc.add(kin, p.pair.0, &p.position, &(-f), &zero);
        }
    }

    pub fn between(&self, a: impl Fn(Body) -> bool, b: impl Fn(Body) -> bool) -> impl Iterator<Item = &ContactPoint> {
        self.points
            .iter()
            .filter(move |p| (a(p.pair.0) && b(p.pair.1)) || (a(p.pair.1) && b(p.pair.0)))
    }
}

struct Candidate {
    pair: (Body, Body),
    feature: u16,
    position: Vector3<f64>,
    normal: Vector3<f64>,
    depth: f64,
}

/// All contact candidates with depth above −w, sorted by (pair, feature), with
/// Jacobians. Forces are left at zero.
pub fn detect_contacts(model: &RobotModel, scene: &SceneSpec, state: &SystemState) -> ContactSet {
    let kin = Kinematics::new(model, state);
    detect_with(model, scene, state, &kin, true)
}

pub(crate) fn detect_with(
    model: &RobotModel,
    scene: &SceneSpec,
    state: &SystemState,
    kin: &Kinematics,
    with_jacobians: bool,
) -> ContactSet {
    let margin = -scene.contact.normal.w;
    let mut cands: Vec<Candidate> = Vec::with_capacity(48);
    let obstacles = scene.obstacles();
    let box_half = scene.box_spec.half_extents();
    let box_rot = state.box_orientation;
    let box_center = kin.box_frame.origin;

    for (i, link) in model.links.iter().enumerate() {
        let frame = &kin.links[i];
        let r = link.shape.radius;
        let ends = link.shape.end_centers(link.capsule_center_x());
        for (e, end) in ends.iter().enumerate() {
            let c = frame.to_world(end);
            let feature = e as u16;
            let depth = r - c.z;
            if depth > margin {
                cands.push(sphere_candidate((Body::Ground, Body::Link(i)), feature, &c, r, Vector3::z(), depth));
            }
            for (body, poly) in &obstacles {
                let q = poly.query(&c);
                let depth = r - q.distance;
                if depth > margin {
                    cands.push(sphere_candidate((*body, Body::Link(i)), feature, &c, r, q.normal, depth));
                }
            }
            if state.latched && i == 0 {
                continue;
            }
            let local = box_rot.inverse_transform_vector(&(c - box_center));
            let q: PointQuery = query_local_box(&local, &box_half, &box_rot);
            let depth = r - q.distance;
            if depth > margin {
                cands.push(sphere_candidate((Body::Box, Body::Link(i)), feature, &c, r, q.normal, depth));
            }
        }
    }

    let corners = crate::geometry::box_corners(&box_center, &box_rot, &box_half);
    for (ci, corner) in corners.iter().enumerate() {
        let depth = -corner.z;
        if depth > margin {
            cands.push(Candidate {
                pair: (Body::Ground, Body::Box),
                feature: ci as u16,
                position: corner + Vector3::z() * (0.5 * depth),
                normal: Vector3::z(),
                depth,
            });
        }
        for (body, poly) in &obstacles {
            let q = poly.query(corner);
            let depth = -q.distance;
            if depth > margin {
                cands.push(Candidate {
                    pair: (*body, Body::Box),
                    feature: ci as u16,
                    position: corner + q.normal * (0.5 * depth),
                    normal: q.normal,
                    depth,
                });
            }
        }
    }
    for (body, poly) in &obstacles {
        for (vi, v) in poly.vertices.iter().enumerate() {
            let local = box_rot.inverse_transform_vector(&(v - box_center));
            let q = query_local_box(&local, &box_half, &box_rot);
            let depth = -q.distance;
            if depth > margin {
                cands.push(Candidate {
                    pair: (*body, Body::Box),
                    feature: 8 + vi as u16,
                    position: v + q.normal * (0.5 * depth),
                    normal: -q.normal,
                    depth,
                });
            }
        }
    }

    if scene.contact.self_contact {
        let segs: Vec<(Vector3<f64>, Vector3<f64>, f64)> = model
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let [a, b] = l.shape.end_centers(l.capsule_center_x());
                (kin.links[i].to_world(&a), kin.links[i].to_world(&b), l.shape.radius)
            })
            .collect();
        for i in 0..NUM_LINKS {
            for j in (i + 2)..NUM_LINKS {
                let (a0, a1, ra) = segs[i];
                let (b0, b1, rb) = segs[j];
                let (s, t) = segment_closest_params(&a0, &a1, &b0, &b1);
                let pa = a0 + (a1 - a0) * s;
                let pb = b0 + (b1 - b0) * t;
                let delta = pb - pa;
                let dist = delta.norm();
                let depth = ra + rb - dist;
                if depth > margin && dist > 1e-12 {
                    let n = delta / dist;
                    cands.push(Candidate {
                        pair: (Body::Link(i), Body::Link(j)),
                        feature: 0,
                        position: pa + n * (ra - 0.5 * depth),
                        normal: n,
                        depth,
                    });
                }
            }
        }
    }

    cands.sort_by(|a, b| (a.pair, a.feature).cmp(&(b.pair, b.feature)));
    let points = cands
        .into_iter()
        .map(|c| finish_point(kin, c, with_jacobians))
        .collect();
    ContactSet { points }
}

fn sphere_candidate(
    pair: (Body, Body),
    feature: u16,
    center: &Vector3<f64>,
    radius: f64,
    normal: Vector3<f64>,
    depth: f64,
) -> Candidate {
    Candidate {
        pair,
        feature,
        position: center - normal * (radius - 0.5 * depth),
        normal,
        depth,
    }
}

fn finish_point(kin: &Kinematics, c: Candidate, with_jacobian: bool) -> ContactPoint {
    let (a, b) = c.pair;
    let tangents = tangent_basis(&c.normal);
    let v_rel = kin.point_velocity(b, &c.position) - kin.point_velocity(a, &c.position);
    let acc_rel = kin.point_bias_acceleration(b, &c.position) - kin.point_bias_acceleration(a, &c.position);
    let frame = Matrix3::from_rows(&[
        c.normal.transpose(),
        tangents.0.transpose(),
        tangents.1.transpose(),
    ]);
    let jacobian = with_jacobian.then(|| {
        let rel: PointJacobian = kin.point_jacobian(b, &c.position) - kin.point_jacobian(a, &c.position);
        frame * rel
    });
    ContactPoint {
        pair: c.pair,
        feature: c.feature,
        position: c.position,
        normal: c.normal,
        tangents,
        depth: c.depth,
        depth_rate: -c.normal.dot(&v_rel),
        tangential_velocity: Vector2::new(tangents.0.dot(&v_rel), tangents.1.dot(&v_rel)),
        jacobian,
        bias_acceleration: frame * acc_rel,
        normal_force: 0.0,
        friction_force: Vector2::zeros(),
    }
}

/// Penalty-law forces for every point.
pub fn resolve_forces(mut set: ContactSet, params: &ContactParams) -> ContactSet {
    resolve_in_place(&mut set, params);
    set
}

pub(crate) fn resolve_in_place(set: &mut ContactSet, params: &ContactParams) {
    for p in &mut set.points {
        let f_n = normal_force(p.depth, p.depth_rate, &params.normal);
        p.normal_force = f_n;
        p.friction_force = friction_force(f_n, &p.tangential_velocity, &params.friction);
    }
}

/// Σ |max(g − w, 0)·f_N|: normal force carried by points separated beyond the
/// transition width.
pub fn complementarity_residual(set: &ContactSet, params: &ContactParams) -> f64 {
    set.points
        .iter()
        .map(|p| ((p.gap() - params.normal.w).max(0.0) * p.normal_force).abs())
        .sum()
}
