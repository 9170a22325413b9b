//! Unit quaternion algebra for body/world rotations.
//!
//! Storage order is `(w, x, y, z)` with Hamilton multiplication and
//! right-handed rotations. File formats that use a different component
//! order (TUM stores `qx qy qz qw`) document it at the I/O layer.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Tolerance for treating a quaternion as unit norm in precondition checks.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Rotation quaternion, scalar part first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let half = 0.5 * angle;
        let s = half.sin() / n;
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// ZYX Euler angles (yaw about z, then pitch about y, then roll about x).
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (0.5 * roll).sin_cos();
        let (sp, cp) = (0.5 * pitch).sin_cos();
        let (sy, cy) = (0.5 * yaw).sin_cos();
        Self::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
    }

    /// First-order rotation for a small rotation vector `delta` (rad):
    /// `(1, delta/2)`, to be renormalized after composition.
    pub fn small_angle(delta: Vector3<f64>) -> Self {
        Self::new(1.0, 0.5 * delta.x, 0.5 * delta.y, 0.5 * delta.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Conjugate; equals the inverse for unit quaternions.
    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Rotate a vector: `q v q*`.
    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        // Expanded form: v + 2 u x (u x v + w v), with u the vector part.
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(&v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Yaw (z rotation) of the ZYX decomposition, in radians.
    pub fn yaw(&self) -> f64 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    /// Absolute rotation angle between two unit quaternions, in radians.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.dot(other).abs().min(1.0);
        2.0 * d.acos()
    }

    /// Normalized linear interpolation, shortest arc. Exact at t = 0 and t = 1.
    pub fn nlerp(a: &Self, b: &Self, t: f64) -> Self {
        if t <= 0.0 {
            return *a;
        }
        if t >= 1.0 {
            return *b;
        }
        let sign = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
        Self::new(
            a.w + t * (sign * b.w - a.w),
            a.x + t * (sign * b.x - a.x),
            a.y + t * (sign * b.y - a.y),
            a.z + t * (sign * b.z - a.z),
        )
        .normalized()
    }
}

impl std::ops::Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn arb_unit_quat() -> impl Strategy<Value = Quaternion> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
        )
            .prop_filter_map("near-zero quaternion", |(w, x, y, z)| {
                let q = Quaternion::new(w, x, y, z);
                (q.norm() > 1e-3).then(|| q.normalized())
            })
    }

    fn arb_vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0)
            .prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    #[test]
    fn identity_rotation_is_identity() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(Quaternion::IDENTITY.rotate(v), v);
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = Quaternion::from_axis_angle(Vector3::z(), FRAC_PI_2);
        let r = q.rotate(Vector3::x());
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn yaw_of_pure_z_rotation() {
        let q = Quaternion::from_euler_zyx(0.0, 0.0, 0.7);
        assert_abs_diff_eq!(q.yaw(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn euler_matches_axis_angle_composition() {
        let q1 = Quaternion::from_euler_zyx(0.1, -0.2, 0.3);
        let q2 = Quaternion::from_axis_angle(Vector3::z(), 0.3)
            * Quaternion::from_axis_angle(Vector3::y(), -0.2)
            * Quaternion::from_axis_angle(Vector3::x(), 0.1);
        assert!(q1.angle_to(&q2) < 1e-12);
    }

    proptest! {
        #[test]
        fn rotation_matches_matrix_oracle(q in arb_unit_quat(), v in arb_vec3()) {
            let by_quat = q.rotate(v);
            let by_matrix = q.to_rotation_matrix() * v;
            prop_assert!((by_quat - by_matrix).norm() <= 1e-9 * (1.0 + v.norm()));
        }

        #[test]
        fn rotation_preserves_norm(q in arb_unit_quat(), v in arb_vec3()) {
            let r = q.rotate(v);
            prop_assert!((r.norm() - v.norm()).abs() <= 1e-9 * (1.0 + v.norm()));
        }

        #[test]
        fn composition_associative(a in arb_unit_quat(), b in arb_unit_quat(), c in arb_unit_quat()) {
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            // Componentwise: angle_to loses precision near zero angles.
            prop_assert!((lhs.w - rhs.w).abs() < 1e-12);
            prop_assert!((lhs.x - rhs.x).abs() < 1e-12);
            prop_assert!((lhs.y - rhs.y).abs() < 1e-12);
            prop_assert!((lhs.z - rhs.z).abs() < 1e-12);
        }

        #[test]
        fn normalize_hits_unit_norm(q in arb_unit_quat()) {
            prop_assert!((q.normalized().norm() - 1.0).abs() <= 1e-9);
        }
    }
}
