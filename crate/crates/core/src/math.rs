//! Quaternion and heading-frame helpers shared across the pipeline.
//!
//! Convention: quaternions are stored as `(w, x, y, z)` with the Hamilton
//! product, and are re-normalized after every composition or integration
//! step. The heading frame of a pose is the rotation about world +z by the
//! pose's yaw; removing it leaves roll/pitch (tilt) only.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

/// Pack a unit quaternion into `[w, x, y, z]` for serialization.
pub fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Build a unit quaternion from `[w, x, y, z]`, normalizing.
pub fn quat_from_wxyz(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Yaw (rotation about world z) of a quaternion, ZYX convention.
pub fn yaw_of(q: &UnitQuaternion<f64>) -> f64 {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
}

/// Pure-yaw rotation extracted from `q`: the heading frame.
pub fn heading_quat(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw_of(q))
}

/// Tilt of `q`: the rotation left after removing yaw, `heading⁻¹ · q`.
pub fn tilt_of(q: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    heading_quat(q).inverse() * q
}

/// Rotation vector (axis · angle) of a quaternion, in radians.
pub fn rotvec(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    q.scaled_axis()
}

/// Quaternion from a rotation vector.
pub fn quat_from_rotvec(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

/// Geodesic distance between two rotations: the angle of `a⁻¹ b` in [0, π].
pub fn geodesic_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    (a.inverse() * b).angle()
}

/// Shortest-arc spherical interpolation.
pub fn slerp_shortest(
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    t: f64,
) -> UnitQuaternion<f64> {
    let mut bq = b.into_inner();
    if a.coords.dot(&b.coords) < 0.0 {
        bq = -bq;
    }
    let bu = UnitQuaternion::from_quaternion(bq);
    match a.try_slerp(&bu, t, 1e-12) {
        Some(q) => q,
        // Nearly parallel: nlerp is exact enough.
        None => UnitQuaternion::from_quaternion(a.lerp(&bu, t)),
    }
}

/// Integrate a world-frame angular velocity over `dt`: `exp(ω dt) · q`.
pub fn integrate_quat(
    q: &UnitQuaternion<f64>,
    omega_world: &Vector3<f64>,
    dt: f64,
) -> UnitQuaternion<f64> {
    quat_from_rotvec(&(omega_world * dt)) * q
}

/// World-frame angular velocity taking `a` to `b` over `dt` (finite difference).
pub fn angular_velocity_between(
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    dt: f64,
) -> Vector3<f64> {
    rotvec(&(b * a.inverse())) / dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn yaw_extraction_matches_euler() {
        let q = UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1);
        assert!((yaw_of(&q) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn tilt_has_no_yaw() {
        let q = UnitQuaternion::from_euler_angles(0.4, 0.25, -2.0);
        assert!(yaw_of(&tilt_of(&q)).abs() < 1e-9);
    }

    #[test]
    fn heading_preserves_vertical() {
        let q = UnitQuaternion::from_euler_angles(0.5, 0.1, 0.9);
        let h = heading_quat(&q);
        let up = h * Vector3::z();
        assert!((up - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn slerp_takes_short_arc() {
        let a = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.1);
        // Same rotation with flipped sign: interpolation must stay near `a`.
        let b = UnitQuaternion::from_quaternion(-a.into_inner());
        let mid = slerp_shortest(&a, &b, 0.5);
        assert!(geodesic_angle(&a, &mid) < 1e-9);
    }

    #[test]
    fn integrate_then_difference_round_trips() {
        let q = UnitQuaternion::from_euler_angles(0.2, 0.3, 0.4);
        let w = Vector3::new(0.5, -1.0, 2.0);
        let q2 = integrate_quat(&q, &w, 0.01);
        let w_back = angular_velocity_between(&q, &q2, 0.01);
        assert!((w - w_back).norm() < 1e-9);
    }

    #[test]
    fn geodesic_is_a_metric_numerically() {
        let a = UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3);
        let b = UnitQuaternion::from_euler_angles(-0.4, 0.5, 1.0);
        assert!(geodesic_angle(&a, &a) < 1e-12);
        assert!((geodesic_angle(&a, &b) - geodesic_angle(&b, &a)).abs() < 1e-12);
        let half = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2);
        assert!((geodesic_angle(&UnitQuaternion::identity(), &(half * half)) - PI).abs() < 1e-9);
    }
}
