use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// A rigid transform: translation plus unit-quaternion rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Build from a translation and exponential-coordinate rotation vector.
    pub fn from_parts(translation: Vector3<f64>, rotvec: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::from_scaled_axis(rotvec),
        }
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            translation: self.translation + self.rotation * other.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv_rot = self.rotation.inverse();
        Transform {
            translation: -(inv_rot * self.translation),
            rotation: inv_rot,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }

    /// Rotation vector (exp coordinates) of the rotation, norm in [0, pi].
    pub fn rotvec(&self) -> Vector3<f64> {
        self.rotation.scaled_axis()
    }
}

/// Geodesic angle between two rotations, in [0, pi]. Uses the atan2 form,
/// which is exact for identical inputs and well conditioned near zero.
pub fn rotation_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    if a.coords == b.coords || a.coords == -b.coords {
        return 0.0;
    }
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Weighted SE(3) distance: translation norm plus `lambda` times the
/// rotation geodesic angle. `lambda` is in metres per radian.
pub fn se3_distance(a: &Transform, b: &Transform, lambda: f64) -> f64 {
    (a.translation - b.translation).norm() + lambda * rotation_angle(&a.rotation, &b.rotation)
}

/// Default translation/rotation tradeoff for the SE(3) metric.
pub const SE3_LAMBDA: f64 = 0.2;

/// Linear interpolation in translation, slerp in rotation. d=0 gives `a`,
/// d=1 gives `b`.
pub fn se3_interpolate(a: &Transform, b: &Transform, d: f64) -> Transform {
    let translation = a.translation.lerp(&b.translation, d);
    let rotation = a
        .rotation
        .try_slerp(&b.rotation, d, 1e-12)
        .unwrap_or_else(|| {
            // Antipodal rotations: spin about a fixed perpendicular axis.
            let axis = perpendicular_unit(&a.rotation.axis().map_or(Vector3::z(), |v| v.into_inner()));
            a.rotation * UnitQuaternion::from_scaled_axis(axis * (std::f64::consts::PI * d))
        });
    Transform {
        translation,
        rotation,
    }
}

fn perpendicular_unit(v: &Vector3<f64>) -> Vector3<f64> {
    let candidate = if v.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    v.cross(&candidate).normalize()
}

/// Left Jacobian of SO(3) at rotation vector `theta`: maps rates of the
/// exponential coordinates to world-frame angular velocity.
pub fn so3_left_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let hat = skew(theta);
    let (c1, c2) = if angle < 1e-4 {
        let a2 = angle * angle;
        (0.5 - a2 / 24.0, 1.0 / 6.0 - a2 / 120.0)
    } else {
        (
            (1.0 - angle.cos()) / (angle * angle),
            (angle - angle.sin()) / (angle * angle * angle),
        )
    };
    Matrix3::identity() + hat * c1 + hat * hat * c2
}

/// Skew-symmetric (cross-product) matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Re-wrap a rotation vector to norm <= pi (same rotation, shortest coords).
pub fn wrap_rotvec(theta: &Vector3<f64>) -> Vector3<f64> {
    let angle = theta.norm();
    if angle <= std::f64::consts::PI {
        return *theta;
    }
    UnitQuaternion::from_scaled_axis(*theta).scaled_axis()
}
