//! Retargeting configuration and the resolved human↔robot correspondence.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{forward_kinematics, KinematicTree, MotionFrame};
use crate::motion::HumanMotion;

use super::RetargetError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetargetConfig {
    /// Key-body position weight w_p.
    pub pos_weight: f64,
    /// Key-body orientation weight w_o.
    pub ori_weight: f64,
    /// Temporal smoothness weight w_s (offline only).
    pub smooth_weight: f64,
    /// Damped-least-squares damping λ (rad²).
    pub dls_damping: f64,
    /// Maximum offline sweeps over the clip.
    pub max_iters: usize,
    /// Per-DOF step clamp for the online step (rad).
    pub step_limit: f64,
    /// Length constant making orientation residuals commensurate with
    /// position rows (m per rad).
    pub rot_to_m: f64,
    /// Human segment name → robot key body name. Empty means identity
    /// (segment names equal key body names).
    pub body_map: Vec<(String, String)>,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            pos_weight: 1.0,
            ori_weight: 0.5,
            smooth_weight: 0.1,
            dls_damping: 1e-4,
            max_iters: 30,
            step_limit: 0.2,
            rot_to_m: 1.0,
            body_map: Vec::new(),
        }
    }
}

impl RetargetConfig {
    pub fn validate(&self) -> Result<(), RetargetError> {
        if self.pos_weight < 0.0 || self.ori_weight < 0.0 || self.smooth_weight < 0.0 {
            return Err(RetargetError::InvalidConfig("weights must be ≥ 0".into()));
        }
        if self.dls_damping <= 0.0 {
            return Err(RetargetError::InvalidConfig("dls_damping must be > 0".into()));
        }
        if self.step_limit <= 0.0 {
            return Err(RetargetError::InvalidConfig("step_limit must be > 0".into()));
        }
        Ok(())
    }
}

/// One human-segment → robot-key-body pair with its rest-pose scale.
#[derive(Clone, Debug)]
pub struct BodyPair {
    pub segment: usize,
    pub key_body: usize,
    /// Human-to-robot limb scale: rest distance ratio robot/human.
    pub scale: f64,
}

/// Correspondence resolved against a concrete human skeleton and robot
/// tree. Scales come from rest poses, computed once.
#[derive(Clone, Debug)]
pub struct RetargetMap {
    pub pairs: Vec<BodyPair>,
    pub human_root: usize,
    /// Scale applied to the human root translation.
    pub root_scale: f64,
}

impl RetargetMap {
    pub fn resolve(
        tree: &KinematicTree,
        human: &HumanMotion,
        cfg: &RetargetConfig,
    ) -> Result<Self, RetargetError> {
        cfg.validate()?;
        let identity: Vec<(String, String)>;
        let map: &[(String, String)] = if cfg.body_map.is_empty() {
            identity = tree
                .key_bodies
                .iter()
                .map(|kb| (kb.name.clone(), kb.name.clone()))
                .collect();
            &identity
        } else {
            &cfg.body_map
        };

        let human_root = human
            .segments
            .iter()
            .position(|s| s.parent.is_none())
            .ok_or_else(|| RetargetError::UnknownSegment("<root>".into()))?;

        // Rest positions: identity rotations, offsets chained.
        let human_rest = human_rest_positions(human);
        let robot_rest = robot_rest_positions(tree);

        let mut pairs = Vec::with_capacity(map.len());
        let mut used = vec![false; tree.key_bodies.len()];
        for (seg_name, kb_name) in map {
            let segment = human
                .segment_index(seg_name)
                .ok_or_else(|| RetargetError::UnknownSegment(seg_name.clone()))?;
            let key_body = tree
                .key_body_index(kb_name)
                .ok_or_else(|| RetargetError::UnknownKeyBody(kb_name.clone()))?;
            if used[key_body] {
                return Err(RetargetError::BodyMapNotInjective(kb_name.clone()));
            }
            used[key_body] = true;
            let human_dist = (human_rest[segment] - human_rest[human_root]).norm();
            let robot_dist = (robot_rest.0[key_body] - robot_rest.1).norm();
            let mut scale = if human_dist > 1e-9 { robot_dist / human_dist } else { 1.0 };
            // Snap the identity case so self-retargeting is exact.
            if (scale - 1.0).abs() < 1e-9 {
                scale = 1.0;
            }
            pairs.push(BodyPair { segment, key_body, scale });
        }
        for (k, kb) in tree.key_bodies.iter().enumerate() {
            if !used[k] {
                return Err(RetargetError::BodyMapIncomplete(kb.name.clone()));
            }
        }
        pairs.sort_by_key(|p| p.key_body);

        // Root translation scale: standing-height ratio from rest geometry.
        let human_low = human_rest.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let robot_low = robot_rest.0.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        let human_height = (human_rest[human_root].z - human_low).abs();
        let robot_height = (robot_rest.1.z - robot_low).abs();
        let mut root_scale = if human_height > 1e-9 { robot_height / human_height } else { 1.0 };
        if (root_scale - 1.0).abs() < 1e-9 {
            root_scale = 1.0;
        }

        Ok(Self { pairs, human_root, root_scale })
    }
}

fn human_rest_positions(human: &HumanMotion) -> Vec<Vector3<f64>> {
    let mut pos = vec![Vector3::zeros(); human.segments.len()];
    for (i, s) in human.segments.iter().enumerate() {
        pos[i] = match s.parent {
            Some(p) => pos[p] + s.rest_offset,
            None => s.rest_offset,
        };
    }
    pos
}

/// Robot key-body rest positions plus the rest root position.
fn robot_rest_positions(tree: &KinematicTree) -> (Vec<Vector3<f64>>, Vector3<f64>) {
    let frame = MotionFrame::zeros(tree.nq());
    let fk = forward_kinematics(tree, &frame).expect("zero frame is valid");
    (fk.key_body_pos, frame.root_pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::synthetic::{human_from_clip, ik_test_clip, LimbScales};

    #[test]
    fn identity_skeleton_resolves_with_unit_scales() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 1, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let map = RetargetMap::resolve(&tree, &human, &RetargetConfig::default()).unwrap();
        assert_eq!(map.pairs.len(), tree.key_bodies.len());
        for p in &map.pairs {
            assert!((p.scale - 1.0).abs() < 1e-9, "scale {}", p.scale);
        }
        assert!((map.root_scale - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_key_body_rejected() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 1, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let cfg = RetargetConfig {
            body_map: vec![("head".into(), "head".into())],
            ..Default::default()
        };
        assert!(matches!(
            RetargetMap::resolve(&tree, &human, &cfg),
            Err(RetargetError::BodyMapIncomplete(_))
        ));
    }

    #[test]
    fn duplicate_target_rejected() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 1, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let mut body_map: Vec<(String, String)> = tree
            .key_bodies
            .iter()
            .map(|kb| (kb.name.clone(), kb.name.clone()))
            .collect();
        body_map.push(("hand_l".into(), "hand_r".into()));
        let cfg = RetargetConfig { body_map, ..Default::default() };
        assert!(matches!(
            RetargetMap::resolve(&tree, &human, &cfg),
            Err(RetargetError::BodyMapNotInjective(_))
        ));
    }
}
