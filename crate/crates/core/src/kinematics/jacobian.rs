//! Analytic key-body Jacobians over the actuated DOFs.

use nalgebra::DMatrix;

use super::{forward_kinematics, KinematicsError, KinematicTree, MotionFrame};

/// 6×N Jacobian of a key body's world twist with respect to the actuated
/// joint angles. Rows 0..3 are linear (m/rad), rows 3..6 angular (rad/rad).
/// Columns of DOFs off the root-to-body path are zero.
pub fn jacobian(
    tree: &KinematicTree,
    frame: &MotionFrame,
    key_body: usize,
) -> Result<DMatrix<f64>, KinematicsError> {
    if key_body >= tree.key_bodies.len() {
        return Err(KinematicsError::InvalidKeyBody {
            index: key_body,
            count: tree.key_bodies.len(),
        });
    }
    let fk = forward_kinematics(tree, frame)?;
    let target = fk.key_body_pos[key_body];

    let mut jac = DMatrix::zeros(6, tree.nq());
    // Walk up from the key body's link; each revolute ancestor contributes
    // axis×(p − p_joint) to the linear rows and the axis to the angular rows.
    let mut link = Some(tree.key_bodies[key_body].link);
    while let Some(i) = link {
        if let Some(dof) = tree.dof_of_joint(i) {
            let tf = &fk.link_transforms[i];
            let axis_world = tf.rotation * tree.joints[i].axis;
            let lever = target - tf.translation.vector;
            let lin = axis_world.cross(&lever);
            for r in 0..3 {
                jac[(r, dof)] = lin[r];
                jac[(r + 3, dof)] = axis_world[r];
            }
        }
        link = tree.joints[i].parent;
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{JointKind, JointSpec, KeyBody};
    use nalgebra::Vector3;

    fn planar_two_link() -> KinematicTree {
        let rev = |name: &str, parent, offset| JointSpec {
            name: name.into(),
            parent: Some(parent),
            offset,
            axis: Vector3::z(),
            kind: JointKind::Revolute,
            limits: [-3.2, 3.2],
            vel_limit: 10.0,
        };
        let joints = vec![
            JointSpec {
                name: "root".into(),
                parent: None,
                offset: Vector3::zeros(),
                axis: Vector3::z(),
                kind: JointKind::FreeRoot,
                limits: [0.0, 0.0],
                vel_limit: 0.0,
            },
            rev("shoulder", 0, Vector3::zeros()),
            rev("elbow", 1, Vector3::x()),
        ];
        let key_bodies = vec![
            KeyBody { name: "tip".into(), link: 2, offset: Vector3::x() },
            KeyBody { name: "base_marker".into(), link: 0, offset: Vector3::zeros() },
        ];
        KinematicTree::new("planar".into(), joints, key_bodies, vec![]).unwrap()
    }

    #[test]
    fn textbook_two_link_jacobian() {
        let tree = planar_two_link();
        let frame = MotionFrame::zeros(2);
        let jac = jacobian(&tree, &frame, 0).unwrap();
        // Tip at (2,0,0): linear block [[0,0],[2,1],[0,0]].
        let expect = [[0.0, 0.0], [2.0, 1.0], [0.0, 0.0]];
        for r in 0..3 {
            for c in 0..2 {
                assert!((jac[(r, c)] - expect[r][c]).abs() < 1e-9, "row {r} col {c}");
            }
        }
        // Angular rows: both columns are the z axis.
        for c in 0..2 {
            assert!((jac[(5, c)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn off_path_columns_are_zero() {
        let tree = planar_two_link();
        let frame = MotionFrame::zeros(2);
        // Marker on the root link: no revolute joint is on its path.
        let jac = jacobian(&tree, &frame, 1).unwrap();
        assert_eq!(jac.iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn invalid_key_body_rejected() {
        let tree = planar_two_link();
        let frame = MotionFrame::zeros(2);
        assert!(jacobian(&tree, &frame, 9).is_err());
    }
}
