//! Heading-aligned local frame and the tracking goals expressed in it.
//!
//! Tracking goals are expressed in the reference frame's own heading-local
//! coordinates (yaw removed, gravity preserved) so world-frame drift never
//! enters the objective.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use crate::math::{heading_quat, quat_from_wxyz, quat_to_wxyz, tilt_of};

use super::{forward_kinematics, KinematicsError, KinematicTree, MotionFrame};

/// Rotate a world-frame vector into the frame's heading-local coordinates.
/// Pure rotation about world z: norms and the vertical axis are preserved.
pub fn world_to_local_vec(frame: &MotionFrame, v: &Vector3<f64>) -> Vector3<f64> {
    heading_quat(&frame.root_quat).inverse() * v
}

/// Inverse of [`world_to_local_vec`].
pub fn local_to_world_vec(frame: &MotionFrame, v: &Vector3<f64>) -> Vector3<f64> {
    heading_quat(&frame.root_quat) * v
}

/// Per-step tracking target in the heading-local frame: joint targets, root
/// height/tilt, root velocity command and key-body positions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingGoal {
    pub joint_pos: DVector<f64>,
    pub joint_vel: DVector<f64>,
    pub root_height: f64,
    /// Root orientation with yaw removed.
    pub root_tilt: UnitQuaternion<f64>,
    /// Root linear velocity, heading-local (m/s).
    pub root_lin_vel: Vector3<f64>,
    /// Root angular velocity, heading-local (rad/s).
    pub root_ang_vel: Vector3<f64>,
    /// Key-body positions relative to the root, heading-local (m).
    pub key_body_pos: Vec<Vector3<f64>>,
}

impl TrackingGoal {
    /// Express a frame's own quantities in its heading-local coordinates.
    pub fn from_frame(tree: &KinematicTree, frame: &MotionFrame) -> Result<Self, KinematicsError> {
        let fk = forward_kinematics(tree, frame)?;
        let heading_inv = heading_quat(&frame.root_quat).inverse();
        let key_body_pos = fk
            .key_body_pos
            .iter()
            .map(|p| heading_inv * (p - frame.root_pos))
            .collect();
        Ok(Self {
            joint_pos: frame.joint_q.clone(),
            joint_vel: frame.joint_qd.clone(),
            root_height: frame.root_pos.z,
            root_tilt: tilt_of(&frame.root_quat),
            root_lin_vel: heading_inv * frame.root_lin_vel,
            root_ang_vel: heading_inv * frame.root_ang_vel,
            key_body_pos,
        })
    }

    /// Flat-vector length for a tree with `nq` DOFs and `nkb` key bodies.
    pub fn dim(nq: usize, nkb: usize) -> usize {
        2 * nq + 1 + 4 + 3 + 3 + 3 * nkb
    }

    /// Flatten into `[joint_pos, joint_vel, height, tilt wxyz, lin, ang, kb…]`.
    pub fn to_vec(&self) -> DVector<f64> {
        let nq = self.joint_pos.len();
        let mut out = DVector::zeros(Self::dim(nq, self.key_body_pos.len()));
        let mut k = 0;
        for i in 0..nq {
            out[k] = self.joint_pos[i];
            k += 1;
        }
        for i in 0..nq {
            out[k] = self.joint_vel[i];
            k += 1;
        }
        out[k] = self.root_height;
        k += 1;
        for v in quat_to_wxyz(&self.root_tilt) {
            out[k] = v;
            k += 1;
        }
        for i in 0..3 {
            out[k] = self.root_lin_vel[i];
            k += 1;
        }
        for i in 0..3 {
            out[k] = self.root_ang_vel[i];
            k += 1;
        }
        for p in &self.key_body_pos {
            for i in 0..3 {
                out[k] = p[i];
                k += 1;
            }
        }
        out
    }

    /// Inverse of [`TrackingGoal::to_vec`].
    pub fn from_vec(v: &DVector<f64>, nq: usize, nkb: usize) -> Result<Self, KinematicsError> {
        if v.len() != Self::dim(nq, nkb) {
            return Err(KinematicsError::DimensionMismatch {
                expected: Self::dim(nq, nkb),
                got: v.len(),
            });
        }
        let mut k = 0;
        let mut take = |n: usize| {
            let s = v.rows(k, n).into_owned();
            k += n;
            s
        };
        let joint_pos = take(nq);
        let joint_vel = take(nq);
        let root_height = take(1)[0];
        let tq = take(4);
        let lin = take(3);
        let ang = take(3);
        let mut key_body_pos = Vec::with_capacity(nkb);
        for _ in 0..nkb {
            let p = take(3);
            key_body_pos.push(Vector3::new(p[0], p[1], p[2]));
        }
        Ok(Self {
            joint_pos,
            joint_vel,
            root_height,
            root_tilt: quat_from_wxyz([tq[0], tq[1], tq[2], tq[3]]),
            root_lin_vel: Vector3::new(lin[0], lin[1], lin[2]),
            root_ang_vel: Vector3::new(ang[0], ang[1], ang[2]),
            key_body_pos,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn frame_with_yaw(yaw: f64) -> MotionFrame {
        let mut f = MotionFrame::zeros(13);
        f.root_quat = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
        f
    }

    #[test]
    fn aligned_robot_passes_through() {
        let f = frame_with_yaw(0.0);
        let v = world_to_local_vec(&f, &Vector3::new(1.0, 0.0, 0.0));
        assert!((v - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn quarter_yaw_rotates_goal() {
        let f = frame_with_yaw(FRAC_PI_2);
        let v = world_to_local_vec(&f, &Vector3::new(1.0, 0.0, 0.0));
        assert!((v - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn round_trip_recovers_world() {
        let mut f = MotionFrame::zeros(13);
        f.root_quat = UnitQuaternion::from_euler_angles(0.7, -0.4, 2.3);
        let v = Vector3::new(0.3, -1.2, 0.8);
        let back = local_to_world_vec(&f, &world_to_local_vec(&f, &v));
        assert!((back - v).norm() < 1e-9);
    }

    #[test]
    fn transform_is_isometry_preserving_vertical() {
        let f = frame_with_yaw(1.234);
        let v = Vector3::new(0.1, 2.0, -0.5);
        let lv = world_to_local_vec(&f, &v);
        assert!((lv.norm() - v.norm()).abs() < 1e-9);
        let up = world_to_local_vec(&f, &Vector3::z());
        assert!((up - Vector3::z()).norm() < 1e-9);
    }

    #[test]
    fn goal_vec_round_trips() {
        let tree = KinematicTree::reference_humanoid();
        let mut frame = MotionFrame::zeros(tree.nq());
        frame.root_pos = Vector3::new(1.0, 2.0, 0.8);
        frame.root_quat = UnitQuaternion::from_euler_angles(0.05, -0.1, 0.9);
        for i in 0..tree.nq() {
            frame.joint_q[i] = 0.1 * i as f64;
        }
        let goal = TrackingGoal::from_frame(&tree, &frame).unwrap();
        let v = goal.to_vec();
        let goal2 = TrackingGoal::from_vec(&v, tree.nq(), tree.key_bodies.len()).unwrap();
        assert!((goal2.to_vec() - v).norm() < 1e-12);
    }
}
