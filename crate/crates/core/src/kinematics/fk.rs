//! Forward kinematics: compose link transforms parent→child.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

use super::{JointKind, KinematicsError, KinematicTree, MotionFrame};

/// World transform per link plus key-body world positions.
#[derive(Clone, Debug)]
pub struct FkResult {
    pub link_transforms: Vec<Isometry3<f64>>,
    pub key_body_pos: Vec<Vector3<f64>>,
}

impl FkResult {
    /// World orientation of a key body (its link's orientation).
    pub fn key_body_rot(&self, tree: &KinematicTree, key_body: usize) -> UnitQuaternion<f64> {
        self.link_transforms[tree.key_bodies[key_body].link].rotation
    }
}

pub fn forward_kinematics(
    tree: &KinematicTree,
    frame: &MotionFrame,
) -> Result<FkResult, KinematicsError> {
    if frame.joint_q.len() != tree.nq() {
        return Err(KinematicsError::DimensionMismatch {
            expected: tree.nq(),
            got: frame.joint_q.len(),
        });
    }
    let mut link_transforms = Vec::with_capacity(tree.joints.len());
    for (i, joint) in tree.joints.iter().enumerate() {
        let local = match joint.kind {
            JointKind::FreeRoot => Isometry3::from_parts(
                Translation3::from(joint.offset + frame.root_pos),
                frame.root_quat,
            ),
            JointKind::Revolute => {
                let q = frame.joint_q[tree.dof_of_joint(i).expect("revolute has dof")];
                let rot = UnitQuaternion::from_axis_angle(
                    &nalgebra::Unit::new_unchecked(joint.axis),
                    q,
                );
                Isometry3::from_parts(Translation3::from(joint.offset), rot)
            }
        };
        let world = match joint.parent {
            Some(p) => link_transforms[p] * local,
            None => local,
        };
        link_transforms.push(world);
    }
    let key_body_pos = tree
        .key_bodies
        .iter()
        .map(|kb| link_transforms[kb.link] * nalgebra::Point3::from(kb.offset))
        .map(|p| p.coords)
        .collect();
    Ok(FkResult { link_transforms, key_body_pos })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{JointSpec, KeyBody};
    use std::f64::consts::FRAC_PI_2;

    fn chain_tree() -> KinematicTree {
        // root -> one revolute joint about z, child link at offset (1,0,0)
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
            JointSpec {
                name: "j1".into(),
                parent: Some(0),
                offset: Vector3::zeros(),
                axis: Vector3::z(),
                kind: JointKind::Revolute,
                limits: [-3.2, 3.2],
                vel_limit: 10.0,
            },
        ];
        let key_bodies = vec![KeyBody { name: "tip".into(), link: 1, offset: Vector3::x() }];
        KinematicTree::new("chain".into(), joints, key_bodies, vec![]).unwrap()
    }

    #[test]
    fn zero_pose_sums_offsets() {
        let tree = KinematicTree::reference_humanoid();
        let frame = MotionFrame::zeros(tree.nq());
        let fk = forward_kinematics(&tree, &frame).unwrap();
        // Walk ancestor offsets by hand for every link.
        for (i, _) in tree.joints.iter().enumerate() {
            let mut expect = Vector3::zeros();
            let mut cur = Some(i);
            while let Some(c) = cur {
                expect += tree.joints[c].offset;
                cur = tree.joints[c].parent;
            }
            assert!((fk.link_transforms[i].translation.vector - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn single_revolute_quarter_turn() {
        let tree = chain_tree();
        let mut frame = MotionFrame::zeros(1);
        frame.joint_q[0] = FRAC_PI_2;
        let fk = forward_kinematics(&tree, &frame).unwrap();
        assert!((fk.key_body_pos[0] - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let tree = chain_tree();
        let frame = MotionFrame::zeros(5);
        assert!(forward_kinematics(&tree, &frame).is_err());
    }

    #[test]
    fn fk_is_deterministic() {
        let tree = KinematicTree::reference_humanoid();
        let mut frame = MotionFrame::zeros(tree.nq());
        for i in 0..tree.nq() {
            frame.joint_q[i] = (i as f64 * 0.37).sin() * 0.5;
        }
        let a = forward_kinematics(&tree, &frame).unwrap();
        let b = forward_kinematics(&tree, &frame).unwrap();
        for (ta, tb) in a.link_transforms.iter().zip(&b.link_transforms) {
            assert_eq!(ta.translation.vector, tb.translation.vector);
            assert_eq!(ta.rotation.coords, tb.rotation.coords);
        }
    }
}
