//! Collision primitives and point queries used by the narrow phase.

use nalgebra::{Isometry3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Sphere-swept segment lying along the local x axis, centred at `center_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub radius: f64,
    pub half_length: f64,
}

impl Capsule {
    /// End-sphere centres in the owning link frame, for a capsule centred at `(center_x, 0, 0)`.
    pub fn end_centers(&self, center_x: f64) -> [Vector3<f64>; 2] {
        [
            Vector3::new(center_x - self.half_length, 0.0, 0.0),
            Vector3::new(center_x + self.half_length, 0.0, 0.0),
        ]
    }
}

/// Result of querying a point against a solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointQuery {
    /// Signed distance from the point to the surface, negative inside.
    pub distance: f64,
    /// Unit normal pointing out of the solid, toward the query point.
    pub normal: Vector3<f64>,
}

/// Box-shaped solid given by a pose and half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub center: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub half_extents: Vector3<f64>,
}

impl Cuboid {
    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self {
            center,
            orientation: UnitQuaternion::identity(),
            half_extents,
        }
    }

    pub fn pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.center.into(), self.orientation)
    }

    /// Exact signed distance for a cuboid: clamp outside, nearest face inside.
    pub fn query(&self, world_point: &Vector3<f64>) -> PointQuery {
        let local = self.orientation.inverse_transform_vector(&(world_point - self.center));
        query_local_box(&local, &self.half_extents, &self.orientation)
    }

    /// The eight corners in world coordinates, ordered by sign pattern (x fastest).
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        box_corners(&self.center, &self.orientation, &self.half_extents)
    }

    pub fn to_polytope(&self) -> ConvexPolytope {
        let mut planes = Vec::with_capacity(6);
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut local = Vector3::zeros();
                local[axis] = sign;
                let n = self.orientation * local;
                let offset = n.dot(&self.center) + self.half_extents[axis];
                planes.push(Plane { normal: n, offset });
            }
        }
        ConvexPolytope {
            planes,
            vertices: self.corners().to_vec(),
        }
    }
}

pub(crate) fn box_corners(
    center: &Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
    half: &Vector3<f64>,
) -> [Vector3<f64>; 8] {
    let mut out = [Vector3::zeros(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        let s = Vector3::new(
            if i & 1 == 0 { -1.0 } else { 1.0 },
            if i & 2 == 0 { -1.0 } else { 1.0 },
            if i & 4 == 0 { -1.0 } else { 1.0 },
        );
        *c = center + orientation * half.component_mul(&s);
    }
    out
}

/// Point query against an oriented box, with the point already in box coordinates.
pub(crate) fn query_local_box(
    local: &Vector3<f64>,
    half: &Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
) -> PointQuery {
    let clamped = Vector3::new(
        local.x.clamp(-half.x, half.x),
        local.y.clamp(-half.y, half.y),
        local.z.clamp(-half.z, half.z),
    );
    let delta = local - clamped;
    let dist = delta.norm();
    if dist > 0.0 {
        return PointQuery {
            distance: dist,
            normal: orientation * (delta / dist),
        };
    }
    // inside: the face with the smallest clearance wins; ties go to the lowest axis
    let mut best_axis = 0;
    let mut best_gap = f64::INFINITY;
    for axis in 0..3 {
        let gap = half[axis] - local[axis].abs();
        if gap < best_gap {
            best_gap = gap;
            best_axis = axis;
        }
    }
    let mut n = Vector3::zeros();
    n[best_axis] = if local[best_axis] >= 0.0 { 1.0 } else { -1.0 };
    PointQuery {
        distance: -best_gap,
        normal: orientation * n,
    }
}

/// `normal · x <= offset` half-space with outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Fixed convex solid described by its bounding planes and vertices.
///
/// Point distances use the largest plane distance: exact inside and across
/// faces, a lower bound near edges and corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolytope {
    pub planes: Vec<Plane>,
    pub vertices: Vec<Vector3<f64>>,
}

impl ConvexPolytope {
    pub fn query(&self, p: &Vector3<f64>) -> PointQuery {
        let mut best = PointQuery {
            distance: f64::NEG_INFINITY,
            normal: Vector3::z(),
        };
        for plane in &self.planes {
            let d = plane.signed_distance(p);
            if d > best.distance {
                best = PointQuery {
                    distance: d,
                    normal: plane.normal,
                };
            }
        }
        best
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) <= 0.0)
    }

    /// Upward-facing support height at horizontal location `(x, y)`, if any.
    pub fn top_height(&self, x: f64, y: f64) -> Option<f64> {
        let mut top = f64::INFINITY;
        let mut bottom = f64::NEG_INFINITY;
        for plane in &self.planes {
            let n = plane.normal;
            let rest = plane.offset - n.x * x - n.y * y;
            if n.z > 1e-12 {
                top = top.min(rest / n.z);
            } else if n.z < -1e-12 {
                bottom = bottom.max(rest / n.z);
            } else if rest < 0.0 {
                return None;
            }
        }
        (top >= bottom && top.is_finite()).then_some(top)
    }
}

/// Closest points between segments `p0–p1` and `q0–q1`, returned as
/// parameters `(s, t)` in `[0, 1]`.
pub fn segment_closest_params(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    q0: &Vector3<f64>,
    q1: &Vector3<f64>,
) -> (f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (0.0, 0.0);
    }
    if a <= f64::EPSILON {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= f64::EPSILON {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > f64::EPSILON {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Deterministic orthonormal tangent pair completing `n` to a right-handed frame.
pub fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.57 {
        Vector3::x()
    } else if n.y.abs() < 0.57 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}
