//! Tree definition and the declarative config schema it is loaded from.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::KinematicsError;

const AXIS_NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    FreeRoot,
}

/// One joint and the link rigidly attached to it. The link frame has its
/// origin at the joint, offset from the parent link frame by `offset`.
#[derive(Clone, Debug)]
pub struct JointSpec {
    pub name: String,
    /// Parent link index; `None` only for the free root.
    pub parent: Option<usize>,
    /// Translation from the parent link frame to this joint (m).
    pub offset: Vector3<f64>,
    /// Rotation axis, unit norm, expressed in this link's frame.
    pub axis: Vector3<f64>,
    pub kind: JointKind,
    /// Position limits [lo, hi] (rad). Unused for the free root.
    pub limits: [f64; 2],
    /// Velocity limit (rad/s).
    pub vel_limit: f64,
}

/// Named point on a link whose world position is tracked by retargeting
/// and by the tracking reward.
#[derive(Clone, Debug)]
pub struct KeyBody {
    pub name: String,
    pub link: usize,
    /// Offset from the link frame origin (m).
    pub offset: Vector3<f64>,
}

/// Rigid-link chain: one free root followed by topologically sorted
/// revolute joints, plus the key-body markers.
#[derive(Clone, Debug)]
pub struct KinematicTree {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub key_bodies: Vec<KeyBody>,
    /// Indices into `key_bodies` (hands and feet on the reference model).
    pub end_effectors: Vec<usize>,
    /// Actuated-DOF index per joint (`None` for the free root).
    dof_index: Vec<Option<usize>>,
    /// Joint index per actuated DOF.
    joint_of_dof: Vec<usize>,
}

impl KinematicTree {
    pub fn new(
        name: String,
        joints: Vec<JointSpec>,
        key_bodies: Vec<KeyBody>,
        end_effectors: Vec<usize>,
    ) -> Result<Self, KinematicsError> {
        let err = |m: String| Err(KinematicsError::InvalidTree(m));
        if joints.is_empty() {
            return err("tree has no joints".into());
        }
        if joints[0].kind != JointKind::FreeRoot || joints[0].parent.is_some() {
            return err("first joint must be the free root".into());
        }
        for (i, j) in joints.iter().enumerate() {
            if i > 0 {
                if j.kind == JointKind::FreeRoot {
                    return err(format!("joint {} is a second free root", j.name));
                }
                match j.parent {
                    Some(p) if p < i => {}
                    Some(p) => return err(format!("joint {} parent {p} not before it", j.name)),
                    None => return err(format!("joint {} has no parent", j.name)),
                }
            }
            if (j.axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
                return err(format!("joint {} axis is not unit norm", j.name));
            }
            if j.limits[0] > j.limits[1] {
                return err(format!("joint {} has limits lo > hi", j.name));
            }
        }
        for kb in &key_bodies {
            if kb.link >= joints.len() {
                return err(format!("key body {} references link {}", kb.name, kb.link));
            }
        }
        for &ee in &end_effectors {
            if ee >= key_bodies.len() {
                return err(format!("end effector index {ee} out of range"));
            }
        }
        let mut dof_index = Vec::with_capacity(joints.len());
        let mut joint_of_dof = Vec::new();
        for (i, j) in joints.iter().enumerate() {
            if j.kind == JointKind::Revolute {
                dof_index.push(Some(joint_of_dof.len()));
                joint_of_dof.push(i);
            } else {
                dof_index.push(None);
            }
        }
        Ok(Self { name, joints, key_bodies, end_effectors, dof_index, joint_of_dof })
    }

    /// Number of actuated DOFs (revolute joints).
    pub fn nq(&self) -> usize {
        self.joint_of_dof.len()
    }

    pub fn num_links(&self) -> usize {
        self.joints.len()
    }

    /// Actuated-DOF index of a joint, `None` for the free root.
    pub fn dof_of_joint(&self, joint: usize) -> Option<usize> {
        self.dof_index[joint]
    }

    pub fn joint_of_dof(&self, dof: usize) -> usize {
        self.joint_of_dof[dof]
    }

    pub fn key_body_index(&self, name: &str) -> Option<usize> {
        self.key_bodies.iter().position(|kb| kb.name == name)
    }

    /// Mid-range angle per actuated DOF (the deterministic cold-start pose).
    pub fn mid_range_q(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(
            self.nq(),
            self.joint_of_dof.iter().map(|&j| {
                let l = self.joints[j].limits;
                0.5 * (l[0] + l[1])
            }),
        )
    }

    /// Clamp a joint vector into limits. Idempotent, no-op inside limits.
    pub fn clamp_to_limits(&self, q: &mut nalgebra::DVector<f64>) {
        for (d, &j) in self.joint_of_dof.iter().enumerate() {
            let l = self.joints[j].limits;
            q[d] = q[d].clamp(l[0], l[1]);
        }
    }

    /// Per-DOF limits as (lo, hi) vectors.
    pub fn limit_vectors(&self) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
        let lo = nalgebra::DVector::from_iterator(
            self.nq(),
            self.joint_of_dof.iter().map(|&j| self.joints[j].limits[0]),
        );
        let hi = nalgebra::DVector::from_iterator(
            self.nq(),
            self.joint_of_dof.iter().map(|&j| self.joints[j].limits[1]),
        );
        (lo, hi)
    }

    pub fn from_config(cfg: TreeConfig) -> Result<Self, KinematicsError> {
        let joints = cfg
            .joints
            .into_iter()
            .map(|j| JointSpec {
                name: j.name,
                parent: j.parent,
                offset: Vector3::from(j.offset),
                axis: Vector3::from(j.axis),
                kind: j.kind,
                limits: j.limits,
                vel_limit: j.vel_limit,
            })
            .collect();
        let key_bodies: Vec<KeyBody> = cfg
            .key_bodies
            .iter()
            .map(|k| KeyBody { name: k.name.clone(), link: k.link, offset: Vector3::from(k.offset) })
            .collect();
        let mut end_effectors = Vec::new();
        for name in &cfg.end_effectors {
            match key_bodies.iter().position(|k| &k.name == name) {
                Some(i) => end_effectors.push(i),
                None => {
                    return Err(KinematicsError::InvalidTree(format!(
                        "end effector {name} is not a key body"
                    )))
                }
            }
        }
        Self::new(cfg.name, joints, key_bodies, end_effectors)
    }

    pub fn to_config(&self) -> TreeConfig {
        TreeConfig {
            name: self.name.clone(),
            joints: self
                .joints
                .iter()
                .map(|j| JointConfig {
                    name: j.name.clone(),
                    parent: j.parent,
                    offset: j.offset.into(),
                    axis: j.axis.into(),
                    kind: j.kind,
                    limits: j.limits,
                    vel_limit: j.vel_limit,
                })
                .collect(),
            key_bodies: self
                .key_bodies
                .iter()
                .map(|k| KeyBodyConfig { name: k.name.clone(), link: k.link, offset: k.offset.into() })
                .collect(),
            end_effectors: self.end_effectors.iter().map(|&i| self.key_bodies[i].name.clone()).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, KinematicsError> {
        let cfg: TreeConfig = serde_json::from_str(s)
            .map_err(|e| KinematicsError::InvalidTree(format!("tree config parse: {e}")))?;
        Self::from_config(cfg)
    }

    /// Names of the actuated joints, in DOF order.
    pub fn dof_names(&self) -> Vec<String> {
        self.joint_of_dof.iter().map(|&j| self.joints[j].name.clone()).collect()
    }

    /// The reduced humanoid that ships with the repo: floating root,
    /// 2×(hip pitch/roll, knee, ankle pitch), 2×(shoulder pitch, elbow),
    /// torso pitch — 13 actuated DOF. Key bodies: head, hands, elbows,
    /// knees, feet; end effectors: hands and feet.
    pub fn reference_humanoid() -> Self {
        Self::from_json_str(REFERENCE_HUMANOID_JSON).expect("bundled model is valid")
    }
}

/// Bundled reference model definition (see `assets/trees/reduced_humanoid.json`).
pub const REFERENCE_HUMANOID_JSON: &str =
    include_str!("../../assets/trees/reduced_humanoid.json");

/// Serde-facing schema of the tree config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub name: String,
    pub joints: Vec<JointConfig>,
    pub key_bodies: Vec<KeyBodyConfig>,
    /// Key body names that count as end effectors.
    pub end_effectors: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub axis: [f64; 3],
    pub kind: JointKind,
    pub limits: [f64; 2],
    pub vel_limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyBodyConfig {
    pub name: String,
    pub link: usize,
    pub offset: [f64; 3],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_has_13_dof() {
        let tree = KinematicTree::reference_humanoid();
        assert_eq!(tree.nq(), 13);
        assert_eq!(tree.key_bodies.len(), 9);
        assert_eq!(tree.end_effectors.len(), 4);
    }

    #[test]
    fn rejects_unsorted_parent() {
        let mk = |parent| JointSpec {
            name: "j".into(),
            parent,
            offset: Vector3::zeros(),
            axis: Vector3::z(),
            kind: JointKind::Revolute,
            limits: [-1.0, 1.0],
            vel_limit: 10.0,
        };
        let root = JointSpec { kind: JointKind::FreeRoot, parent: None, ..mk(None) };
        let bad = vec![root, mk(Some(2))];
        assert!(KinematicTree::new("t".into(), bad, vec![], vec![]).is_err());
    }

    #[test]
    fn clamp_is_idempotent_and_noop_inside() {
        let tree = KinematicTree::reference_humanoid();
        let mut q = tree.mid_range_q();
        let orig = q.clone();
        tree.clamp_to_limits(&mut q);
        assert_eq!(q, orig);
        q[0] = 1e6;
        tree.clamp_to_limits(&mut q);
        let once = q.clone();
        tree.clamp_to_limits(&mut q);
        assert_eq!(q, once);
    }
}
