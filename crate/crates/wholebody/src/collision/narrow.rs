//! Closed-form narrow-phase tests between spheres, capsules, and oriented
//! boxes. Every pair reduces to segment-segment, point-box, segment-box, or
//! box-box feature enumeration; the result is a signed distance (negative
//! means penetration by that depth).

use nalgebra::{Matrix3, Vector3};

use crate::kinematics::Transform;
use crate::model::{CollisionShape, ShapeKind};

/// A collision primitive resolved into the world frame.
#[derive(Debug, Clone)]
pub enum WorldShape {
    /// Segment plus radius; a sphere is a zero-length capsule.
    Capsule {
        p0: Vector3<f64>,
        p1: Vector3<f64>,
        radius: f64,
    },
    Box {
        center: Vector3<f64>,
        rot: Matrix3<f64>,
        half: Vector3<f64>,
    },
}

impl WorldShape {
    pub fn from_shape(shape: &CollisionShape, owner_pose: &Transform) -> WorldShape {
        let pose = owner_pose.compose(&shape.pose);
        match &shape.kind {
            ShapeKind::Sphere { radius } => WorldShape::Capsule {
                p0: pose.translation,
                p1: pose.translation,
                radius: *radius,
            },
            ShapeKind::Capsule { p0, p1, radius } => WorldShape::Capsule {
                p0: pose.transform_point(p0),
                p1: pose.transform_point(p1),
                radius: *radius,
            },
            ShapeKind::Cuboid { half_extents } => WorldShape::Box {
                center: pose.translation,
                rot: pose.rotation.to_rotation_matrix().into_inner(),
                half: *half_extents,
            },
        }
    }

    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            WorldShape::Capsule { p0, p1, radius } => {
                let min = Vector3::new(
                    p0.x.min(p1.x) - radius,
                    p0.y.min(p1.y) - radius,
                    p0.z.min(p1.z) - radius,
                );
                let max = Vector3::new(
                    p0.x.max(p1.x) + radius,
                    p0.y.max(p1.y) + radius,
                    p0.z.max(p1.z) + radius,
                );
                (min, max)
            }
            WorldShape::Box { center, rot, half } => {
                // |R| * h bounds the rotated box.
                let extent = Vector3::new(
                    rot.row(0).iter().zip(half.iter()).map(|(r, h)| r.abs() * h).sum(),
                    rot.row(1).iter().zip(half.iter()).map(|(r, h)| r.abs() * h).sum(),
                    rot.row(2).iter().zip(half.iter()).map(|(r, h)| r.abs() * h).sum(),
                );
                (center - extent, center + extent)
            }
        }
    }
}

pub fn aabb_overlap(a: &(Vector3<f64>, Vector3<f64>), b: &(Vector3<f64>, Vector3<f64>)) -> bool {
    a.0.x <= b.1.x
        && b.0.x <= a.1.x
        && a.0.y <= b.1.y
        && b.0.y <= a.1.y
        && a.0.z <= b.1.z
        && b.0.z <= a.1.z
}

/// Signed distance between two world shapes: positive separation, negative
/// penetration depth.
pub fn signed_distance(a: &WorldShape, b: &WorldShape) -> f64 {
    match (a, b) {
        (
            WorldShape::Capsule { p0, p1, radius },
            WorldShape::Capsule { p0: q0, p1: q1, radius: r2 },
        ) => segment_segment_distance(p0, p1, q0, q1) - radius - r2,
        (WorldShape::Capsule { p0, p1, radius }, WorldShape::Box { center, rot, half }) => {
            segment_box_signed(p0, p1, center, rot, half) - radius
        }
        (WorldShape::Box { center, rot, half }, WorldShape::Capsule { p0, p1, radius }) => {
            segment_box_signed(p0, p1, center, rot, half) - radius
        }
        (
            WorldShape::Box { center, rot, half },
            WorldShape::Box { center: c2, rot: r2, half: h2 },
        ) => box_box_signed(center, rot, half, c2, r2, h2),
    }
}

/// Closest distance between segments [p0,p1] and [q0,q1] (Ericson ch. 5).
pub fn segment_segment_distance(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    q0: &Vector3<f64>,
    q1: &Vector3<f64>,
) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-18 && e <= 1e-18 {
        return r.norm();
    }
    if a <= 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let bb = d1.dot(&d2);
            let denom = a * e - bb * bb;
            let mut s_ = if denom > 1e-18 {
                ((bb * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t_ = (bb * s_ + f) / e;
            let t_clamped = t_.clamp(0.0, 1.0);
            if t_ != t_clamped {
                s_ = ((t_clamped * bb - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_clamped;
        }
    }
    let cp = p0 + d1 * s;
    let cq = q0 + d2 * t;
    (cp - cq).norm()
}

/// Distance from a point to a box surface; negative inside (depth to the
/// nearest face).
pub fn point_box_signed(
    p: &Vector3<f64>,
    center: &Vector3<f64>,
    rot: &Matrix3<f64>,
    half: &Vector3<f64>,
) -> f64 {
    let local = rot.transpose() * (p - center);
    let mut outside = Vector3::zeros();
    let mut inside_depth = f64::INFINITY;
    let mut is_outside = false;
    for k in 0..3 {
        let d = local[k].abs() - half[k];
        if d > 0.0 {
            outside[k] = d;
            is_outside = true;
        } else {
            inside_depth = inside_depth.min(-d);
        }
    }
    if is_outside {
        outside.norm()
    } else {
        -inside_depth
    }
}

fn box_corners(center: &Vector3<f64>, rot: &Matrix3<f64>, half: &Vector3<f64>) -> [Vector3<f64>; 8] {
    let mut out = [Vector3::zeros(); 8];
    let mut idx = 0;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let local = Vector3::new(sx * half.x, sy * half.y, sz * half.z);
                out[idx] = center + rot * local;
                idx += 1;
            }
        }
    }
    out
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (0, 2),
    (0, 4),
    (1, 3),
    (1, 5),
    (2, 3),
    (2, 6),
    (3, 7),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 7),
];

/// True if segment [p0,p1] intersects the solid box (slab clipping);
/// also returns the clipped parameter interval.
fn segment_box_clip(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    center: &Vector3<f64>,
    rot: &Matrix3<f64>,
    half: &Vector3<f64>,
) -> Option<(f64, f64)> {
    let a = rot.transpose() * (p0 - center);
    let b = rot.transpose() * (p1 - center);
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if a[k].abs() > half[k] {
                return None;
            }
        } else {
            let inv = 1.0 / d[k];
            let mut ta = (-half[k] - a[k]) * inv;
            let mut tb = (half[k] - a[k]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((t0, t1))
}

/// Signed distance between a segment and a box: exact positive distance via
/// feature enumeration, negative depth (deepest interior point of the
/// clipped segment) when they intersect.
pub fn segment_box_signed(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    center: &Vector3<f64>,
    rot: &Matrix3<f64>,
    half: &Vector3<f64>,
) -> f64 {
    if let Some((t0, t1)) = segment_box_clip(p0, p1, center, rot, half) {
        // Depth along the clipped interval is concave piecewise-linear in t;
        // ternary search finds the deepest point.
        let d = p1 - p0;
        let depth_at = |t: f64| -point_box_signed(&(p0 + d * t), center, rot, half);
        let (mut lo, mut hi) = (t0, t1);
        for _ in 0..48 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if depth_at(m1) < depth_at(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let deepest = depth_at(0.5 * (lo + hi)).max(depth_at(t0)).max(depth_at(t1));
        return -deepest;
    }
    let mut best = point_box_signed(p0, center, rot, half)
        .min(point_box_signed(p1, center, rot, half));
    let corners = box_corners(center, rot, half);
    for (i, j) in BOX_EDGES {
        best = best.min(segment_segment_distance(p0, p1, &corners[i], &corners[j]));
    }
    best
}

/// Signed distance between two oriented boxes: SAT penetration when they
/// overlap, exact feature-enumeration distance otherwise.
pub fn box_box_signed(
    c1: &Vector3<f64>,
    r1: &Matrix3<f64>,
    h1: &Vector3<f64>,
    c2: &Vector3<f64>,
    r2: &Matrix3<f64>,
    h2: &Vector3<f64>,
) -> f64 {
    // SAT over the 15 candidate axes.
    let mut axes: Vec<Vector3<f64>> = Vec::with_capacity(15);
    for k in 0..3 {
        axes.push(r1.column(k).into());
        axes.push(r2.column(k).into());
    }
    for i in 0..3 {
        for j in 0..3 {
            let ci: Vector3<f64> = r1.column(i).into();
            let cj: Vector3<f64> = r2.column(j).into();
            let axis = ci.cross(&cj);
            if axis.norm() > 1e-12 {
                axes.push(axis.normalize());
            }
        }
    }
    let d = c2 - c1;
    let mut min_overlap = f64::INFINITY;
    for axis in &axes {
        let ra: f64 = (0..3)
            .map(|k| (axis.dot(&r1.column(k)) * h1[k]).abs())
            .sum();
        let rb: f64 = (0..3)
            .map(|k| (axis.dot(&r2.column(k)) * h2[k]).abs())
            .sum();
        let overlap = ra + rb - axis.dot(&d).abs();
        if overlap < 0.0 {
            // Separated; fall through to the exact distance below.
            min_overlap = f64::NEG_INFINITY;
            break;
        }
        min_overlap = min_overlap.min(overlap);
    }
    if min_overlap >= 0.0 {
        return -min_overlap;
    }

    let mut best = f64::INFINITY;
    let corners1 = box_corners(c1, r1, h1);
    let corners2 = box_corners(c2, r2, h2);
    for p in &corners1 {
        best = best.min(point_box_signed(p, c2, r2, h2));
    }
    for p in &corners2 {
        best = best.min(point_box_signed(p, c1, r1, h1));
    }
    for (i, j) in BOX_EDGES {
        for (k, l) in BOX_EDGES {
            best = best.min(segment_segment_distance(
                &corners1[i],
                &corners1[j],
                &corners2[k],
                &corners2[l],
            ));
        }
    }
    best
}
