//! The shared retargeting objective: key-body position + orientation
//! tracking plus temporal smoothness, and its per-term breakdown.

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};

use crate::kinematics::{forward_kinematics, FkResult, KinematicTree, MotionFrame};
use crate::math::rotvec;
use crate::motion::{HumanFrame, HumanMotion, MotionClip};

use super::{RetargetConfig, RetargetMap};

/// Raw (unweighted) objective terms. The optimizer minimizes
/// `pos_weight·position + ori_weight·rot_to_m²·orientation + smooth_weight·smoothness`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveBreakdown {
    /// Σ over key bodies of squared position error (m²).
    pub position_m2: f64,
    /// Σ over key bodies of squared geodesic orientation error (rad²).
    pub orientation_rad2: f64,
    /// Σ of squared second differences of joint angles (rad²/step²).
    pub smoothness_rad2: f64,
}

impl ObjectiveBreakdown {
    pub fn weighted_total(&self, cfg: &RetargetConfig) -> f64 {
        cfg.pos_weight * self.position_m2
            + cfg.ori_weight * cfg.rot_to_m * cfg.rot_to_m * self.orientation_rad2
            + cfg.smooth_weight * self.smoothness_rad2
    }

    pub fn accumulate(&mut self, other: &ObjectiveBreakdown) {
        self.position_m2 += other.position_m2;
        self.orientation_rad2 += other.orientation_rad2;
        self.smoothness_rad2 += other.smoothness_rad2;
    }
}

/// World-frame targets extracted from one human frame.
#[derive(Clone, Debug)]
pub(crate) struct FrameTargets {
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    /// Per map pair, in pair order: target position and orientation.
    pub pos: Vec<Vector3<f64>>,
    pub rot: Vec<UnitQuaternion<f64>>,
}

pub(crate) fn frame_targets(map: &RetargetMap, hf: &HumanFrame) -> FrameTargets {
    let root = hf.pos[map.human_root];
    let pos = map
        .pairs
        .iter()
        .map(|p| {
            if p.scale == 1.0 && map.root_scale == 1.0 {
                // Identity fast path keeps self-retargeting bit-exact.
                hf.pos[p.segment]
            } else {
                root * map.root_scale + (hf.pos[p.segment] - root) * p.scale
            }
        })
        .collect();
    let rot = map.pairs.iter().map(|p| hf.quat[p.segment]).collect();
    let root_pos = if map.root_scale == 1.0 { root } else { root * map.root_scale };
    FrameTargets { root_pos, root_quat: hf.quat[map.human_root], pos, rot }
}

/// Jacobian of one key body reusing an already-computed FK pass.
/// Rows 0..3 linear, 3..6 angular (same layout as [`crate::kinematics::jacobian`]).
pub(crate) fn jacobian_from_fk(
    tree: &KinematicTree,
    fk: &FkResult,
    key_body: usize,
) -> DMatrix<f64> {
    let target = fk.key_body_pos[key_body];
    let mut jac = DMatrix::zeros(6, tree.nq());
    let mut link = Some(tree.key_bodies[key_body].link);
    while let Some(i) = link {
        if let Some(dof) = tree.dof_of_joint(i) {
            let tf = &fk.link_transforms[i];
            let axis_world = tf.rotation * tree.joints[i].axis;
            let lin = axis_world.cross(&(target - tf.translation.vector));
            for r in 0..3 {
                jac[(r, dof)] = lin[r];
                jac[(r + 3, dof)] = axis_world[r];
            }
        }
        link = tree.joints[i].parent;
    }
    jac
}

/// Weighted tracking residual r and Jacobian J for one frame, stacked over
/// all mapped key bodies: position rows scaled by √w_p, orientation rows by
/// √w_o·rot_to_m. Solving J·Δq ≈ r reduces the weighted objective.
pub(crate) fn tracking_residual(
    tree: &KinematicTree,
    cfg: &RetargetConfig,
    map: &RetargetMap,
    targets: &FrameTargets,
    fk: &FkResult,
) -> (DVector<f64>, DMatrix<f64>) {
    let use_pos = cfg.pos_weight > 0.0;
    let use_ori = cfg.ori_weight > 0.0;
    let rows_per = 3 * (use_pos as usize + use_ori as usize);
    let n = tree.nq();
    let mut r = DVector::zeros(rows_per * map.pairs.len());
    let mut jac = DMatrix::zeros(rows_per * map.pairs.len(), n);
    let sw_p = cfg.pos_weight.sqrt();
    let sw_o = cfg.ori_weight.sqrt() * cfg.rot_to_m;

    let mut row = 0usize;
    for (i, pair) in map.pairs.iter().enumerate() {
        let body_jac = jacobian_from_fk(tree, fk, pair.key_body);
        if use_pos {
            let err = targets.pos[i] - fk.key_body_pos[pair.key_body];
            for k in 0..3 {
                r[row + k] = sw_p * err[k];
                for c in 0..n {
                    jac[(row + k, c)] = sw_p * body_jac[(k, c)];
                }
            }
            row += 3;
        }
        if use_ori {
            let cur = fk.key_body_rot(tree, pair.key_body);
            let err = rotvec(&(targets.rot[i] * cur.inverse()));
            for k in 0..3 {
                r[row + k] = sw_o * err[k];
                for c in 0..n {
                    jac[(row + k, c)] = sw_o * body_jac[(k + 3, c)];
                }
            }
            row += 3;
        }
    }
    (r, jac)
}

/// Raw tracking terms of one frame against one human frame.
pub fn objective_breakdown(
    tree: &KinematicTree,
    cfg: &RetargetConfig,
    map: &RetargetMap,
    frame: &MotionFrame,
    human_frame: &HumanFrame,
    neighbors: Option<(&MotionFrame, &MotionFrame)>,
) -> ObjectiveBreakdown {
    let _ = cfg;
    let fk = forward_kinematics(tree, frame).expect("frame matches tree");
    let targets = frame_targets(map, human_frame);
    let mut out = ObjectiveBreakdown::default();
    for (i, pair) in map.pairs.iter().enumerate() {
        out.position_m2 += (targets.pos[i] - fk.key_body_pos[pair.key_body]).norm_squared();
        let cur = fk.key_body_rot(tree, pair.key_body);
        out.orientation_rad2 += rotvec(&(targets.rot[i] * cur.inverse())).norm_squared();
    }
    if let Some((prev, next)) = neighbors {
        out.smoothness_rad2 = (&next.joint_q - 2.0 * &frame.joint_q + &prev.joint_q).norm_squared();
    }
    out
}

/// Whole-clip objective: tracking terms summed over frames plus smoothness
/// over interior frames. Clip and human must be frame-aligned.
pub fn clip_objective(
    tree: &KinematicTree,
    cfg: &RetargetConfig,
    map: &RetargetMap,
    clip: &MotionClip,
    human: &HumanMotion,
) -> ObjectiveBreakdown {
    let mut total = ObjectiveBreakdown::default();
    let n = clip.frames.len().min(human.frames.len());
    for t in 0..n {
        let b = objective_breakdown(tree, cfg, map, &clip.frames[t], &human.frames[t], None);
        total.accumulate(&b);
    }
    for t in 1..n.saturating_sub(1) {
        total.smoothness_rad2 += (&clip.frames[t + 1].joint_q - 2.0 * &clip.frames[t].joint_q
            + &clip.frames[t - 1].joint_q)
            .norm_squared();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::synthetic::{human_from_clip, ik_test_clip, LimbScales};

    #[test]
    fn perfect_match_is_zero() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 2, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let cfg = RetargetConfig::default();
        let map = RetargetMap::resolve(&tree, &human, &cfg).unwrap();
        let b = objective_breakdown(&tree, &cfg, &map, &clip.frames[0], &human.frames[0], None);
        assert!(b.position_m2 < 1e-18, "pos {}", b.position_m2);
        assert!(b.orientation_rad2 < 1e-18, "ori {}", b.orientation_rad2);
    }

    #[test]
    fn known_offset_gives_squared_term() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 2, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let cfg = RetargetConfig { pos_weight: 1.0, ..Default::default() };
        let map = RetargetMap::resolve(&tree, &human, &cfg).unwrap();
        // Offset one mapped segment by 0.1 m.
        let mut hf = human.frames[0].clone();
        let seg = map.pairs[0].segment;
        hf.pos[seg] += Vector3::new(0.1, 0.0, 0.0) / map.pairs[0].scale;
        let b = objective_breakdown(&tree, &cfg, &map, &clip.frames[0], &hf, None);
        assert!((b.position_m2 - 0.01).abs() < 1e-9, "pos {}", b.position_m2);
    }
}
