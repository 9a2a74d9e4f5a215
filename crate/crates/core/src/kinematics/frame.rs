//! The canonical per-frame robot state: root pose, joint angles, velocities.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use super::{KinematicsError, KinematicTree};

const QUAT_NORM_TOL: f64 = 1e-6;

/// One frame of retargeted humanoid motion. Root velocities are world-frame;
/// `root_quat` is (w, x, y, z) Hamilton, unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionFrame {
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    pub joint_q: DVector<f64>,
    pub root_lin_vel: Vector3<f64>,
    pub root_ang_vel: Vector3<f64>,
    pub joint_qd: DVector<f64>,
}

impl MotionFrame {
    /// All-zero frame (identity root) with `nq` joint DOFs.
    pub fn zeros(nq: usize) -> Self {
        Self {
            root_pos: Vector3::zeros(),
            root_quat: UnitQuaternion::identity(),
            joint_q: DVector::zeros(nq),
            root_lin_vel: Vector3::zeros(),
            root_ang_vel: Vector3::zeros(),
            joint_qd: DVector::zeros(nq),
        }
    }

    pub fn nq(&self) -> usize {
        self.joint_q.len()
    }

    pub fn validate(&self, tree: &KinematicTree) -> Result<(), KinematicsError> {
        if self.joint_q.len() != tree.nq() || self.joint_qd.len() != tree.nq() {
            return Err(KinematicsError::DimensionMismatch {
                expected: tree.nq(),
                got: self.joint_q.len(),
            });
        }
        if (self.root_quat.into_inner().norm() - 1.0).abs() > QUAT_NORM_TOL {
            return Err(KinematicsError::InvalidFrame("root quaternion not unit".into()));
        }
        let finite = self.root_pos.iter().all(|v| v.is_finite())
            && self.root_lin_vel.iter().all(|v| v.is_finite())
            && self.root_ang_vel.iter().all(|v| v.is_finite())
            && self.joint_q.iter().all(|v| v.is_finite())
            && self.joint_qd.iter().all(|v| v.is_finite());
        if !finite {
            return Err(KinematicsError::InvalidFrame("non-finite value".into()));
        }
        Ok(())
    }
}
