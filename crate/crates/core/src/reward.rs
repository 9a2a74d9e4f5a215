//! Tracking rewards and penalties: r = r_track + r_penalty with a full
//! per-term breakdown.
//!
//! Tracking terms are exponential kernels `w·exp(−‖err‖²/σ²)` on
//! heading-local quantities; both the state and the goal are expressed in
//! their own heading frames, so every term is invariant to world yaw.
//! Penalty forms: feet-contact counts contact-state mismatches against the
//! reference, slip is linear in tangential foot speed while in contact,
//! joint-velocity and action-rate are L2, and feet air time is the swing
//! duration credited at touchdown against a 0.5 s target.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::kinematics::{KinematicsError, KinematicTree, TrackingGoal};
use crate::math::geodesic_angle;
use crate::sim::SimState;

/// Weights and kernel scales. Weight defaults are the deployment table;
/// kernel scales and the air-time target are artifact configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub keybody_pos: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
    pub root_pose: f64,
    pub root_vel: f64,
    pub feet_contact: f64,
    pub feet_slip: f64,
    pub joint_vel_penalty: f64,
    pub action_rate: f64,
    pub feet_air_time: f64,
    pub sigma_keybody: f64,
    pub sigma_joint_pos: f64,
    pub sigma_joint_vel: f64,
    pub sigma_root_pose: f64,
    pub sigma_root_vel: f64,
    /// Target swing duration for the air-time bonus (s).
    pub air_time_target_s: f64,
    /// Reference foot height at or below which the reference is treated as
    /// in contact (m).
    pub contact_height_threshold: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            keybody_pos: 2.0,
            joint_pos: 0.6,
            joint_vel: 0.2,
            root_pose: 0.6,
            root_vel: 1.0,
            feet_contact: -5e-4,
            feet_slip: -0.1,
            joint_vel_penalty: -1e-4,
            action_rate: -0.01,
            feet_air_time: 5.0,
            sigma_keybody: 0.3,
            sigma_joint_pos: 0.5,
            sigma_joint_vel: 5.0,
            sigma_root_pose: 0.3,
            sigma_root_vel: 0.5,
            air_time_target_s: 0.5,
            contact_height_threshold: 0.01,
        }
    }
}

/// One scalar per reward table row plus the exact sums.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub keybody_pos: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
    pub root_pose: f64,
    pub root_vel: f64,
    pub feet_contact: f64,
    pub feet_slip: f64,
    pub joint_vel_penalty: f64,
    pub action_rate: f64,
    pub feet_air_time: f64,
    pub total_track: f64,
    pub total_penalty: f64,
    pub total: f64,
}

/// Static context shared by every reward evaluation.
pub struct RewardContext<'a> {
    pub tree: &'a KinematicTree,
    /// Key-body indices of the ground-contact bodies, in the same order as
    /// the state's contact flags.
    pub contact_bodies: &'a [usize],
    pub root_dofs: usize,
}

pub fn compute_reward(
    ctx: &RewardContext,
    state: &SimState,
    action: &DVector<f64>,
    prev_action: &DVector<f64>,
    goal: &TrackingGoal,
    w: &RewardWeights,
    touchdowns: &[(usize, f64)],
) -> Result<RewardBreakdown, KinematicsError> {
    let nq = ctx.tree.nq();
    if goal.joint_pos.len() != nq || action.len() != nq || prev_action.len() != nq {
        return Err(KinematicsError::DimensionMismatch { expected: nq, got: goal.joint_pos.len() });
    }

    let frame = state.to_frame(ctx.root_dofs);
    let local = TrackingGoal::from_frame(ctx.tree, &frame)?;

    let kernel = |err2: f64, sigma: f64, weight: f64| weight * (-err2 / (sigma * sigma)).exp();

    let kb_err2: f64 = local
        .key_body_pos
        .iter()
        .zip(&goal.key_body_pos)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    let joint_pos_err2 = (&local.joint_pos - &goal.joint_pos).norm_squared();
    let joint_vel_err2 = (&local.joint_vel - &goal.joint_vel).norm_squared();
    let pose_err2 = {
        let dh = local.root_height - goal.root_height;
        let da = geodesic_angle(&local.root_tilt, &goal.root_tilt);
        dh * dh + da * da
    };
    let vel_err2 = (local.root_lin_vel - goal.root_lin_vel).norm_squared()
        + (local.root_ang_vel - goal.root_ang_vel).norm_squared();

    let mut out = RewardBreakdown {
        keybody_pos: kernel(kb_err2, w.sigma_keybody, w.keybody_pos),
        joint_pos: kernel(joint_pos_err2, w.sigma_joint_pos, w.joint_pos),
        joint_vel: kernel(joint_vel_err2, w.sigma_joint_vel, w.joint_vel),
        root_pose: kernel(pose_err2, w.sigma_root_pose, w.root_pose),
        root_vel: kernel(vel_err2, w.sigma_root_vel, w.root_vel),
        ..Default::default()
    };

    // Reference contact: the goal's foot key bodies near the ground.
    let mut mismatches = 0usize;
    for (i, &kb) in ctx.contact_bodies.iter().enumerate() {
        let ref_height = goal.root_height + goal.key_body_pos[kb].z;
        let ref_contact = ref_height <= w.contact_height_threshold;
        if state.foot_contact[i] != ref_contact {
            mismatches += 1;
        }
    }
    out.feet_contact = w.feet_contact * mismatches as f64;
    out.feet_slip = w.feet_slip * state.foot_slip_speed.iter().sum::<f64>();
    out.joint_vel_penalty = w.joint_vel_penalty * local.joint_vel.norm_squared();
    out.action_rate = w.action_rate * (action - prev_action).norm_squared();
    out.feet_air_time = w.feet_air_time
        * touchdowns.iter().map(|(_, air)| air - w.air_time_target_s).sum::<f64>();

    out.total_track = out.keybody_pos + out.joint_pos + out.joint_vel + out.root_pose + out.root_vel;
    out.total_penalty = out.feet_contact
        + out.feet_slip
        + out.joint_vel_penalty
        + out.action_rate
        + out.feet_air_time;
    out.total = out.total_track + out.total_penalty;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quat_from_rotvec;
    use crate::motion::synthetic::standing_frame;
    use crate::sim::SimModel;
    use nalgebra::{UnitQuaternion, Vector3};

    fn setup() -> (SimModel, TrackingGoal, SimState) {
        let model = SimModel::reference_humanoid();
        let frame = standing_frame(&model.tree);
        let goal = TrackingGoal::from_frame(&model.tree, &frame).unwrap();
        let mut state = SimState::from_frame(&frame, model.root_dofs(), model.contact_bodies.len());
        // Standing reference feet are at the ground: flags match.
        state.foot_contact = vec![true; model.contact_bodies.len()];
        (model, goal, state)
    }

    fn ctx(model: &SimModel) -> RewardContext<'_> {
        RewardContext {
            tree: &model.tree,
            contact_bodies: &model.contact_bodies,
            root_dofs: model.root_dofs(),
        }
    }

    #[test]
    fn perfect_tracking_yields_exact_weights() {
        let (model, goal, state) = setup();
        let a = state.joint_q.clone();
        let w = RewardWeights::default();
        let b = compute_reward(&ctx(&model), &state, &a, &a, &goal, &w, &[]).unwrap();
        assert_eq!(b.keybody_pos, 2.0);
        assert_eq!(b.joint_pos, 0.6);
        assert_eq!(b.joint_vel, 0.2);
        assert_eq!(b.root_pose, 0.6);
        assert_eq!(b.root_vel, 1.0);
        assert_eq!(b.feet_contact, 0.0);
        assert_eq!(b.feet_slip, 0.0);
        assert_eq!(b.action_rate, 0.0);
        assert_eq!(b.total_track, 2.0 + 0.6 + 0.2 + 0.6 + 1.0);
        assert_eq!(b.total, b.total_track + b.total_penalty);
    }

    #[test]
    fn huge_error_drives_tracking_to_zero() {
        let (model, mut goal, state) = setup();
        goal.joint_pos = goal.joint_pos.map(|_| 1e6);
        for p in goal.key_body_pos.iter_mut() {
            *p += Vector3::new(1e5, 0.0, 0.0);
        }
        let a = state.joint_q.clone();
        let w = RewardWeights::default();
        let b = compute_reward(&ctx(&model), &state, &a, &a, &goal, &w, &[]).unwrap();
        assert!(b.keybody_pos.abs() < 1e-300);
        assert!(b.joint_pos.abs() < 1e-300);
    }

    #[test]
    fn slip_penalty_is_linear() {
        let (model, goal, mut state) = setup();
        state.foot_slip_speed[0] = 0.1;
        let a = state.joint_q.clone();
        let w = RewardWeights::default();
        let b = compute_reward(&ctx(&model), &state, &a, &a, &goal, &w, &[]).unwrap();
        assert!((b.feet_slip - (-0.01)).abs() < 1e-15, "{}", b.feet_slip);
    }

    #[test]
    fn tracking_terms_decrease_with_error() {
        let (model, goal, state) = setup();
        let a = state.joint_q.clone();
        let w = RewardWeights::default();
        let mut last = f64::INFINITY;
        for mag in [0.0, 0.1, 0.3, 0.9, 2.7] {
            let mut g = goal.clone();
            g.joint_pos = g.joint_pos.map(|v| v + mag);
            let b = compute_reward(&ctx(&model), &state, &a, &a, &g, &w, &[]).unwrap();
            assert!(b.joint_pos < last || mag == 0.0);
            last = b.joint_pos;
        }
    }

    #[test]
    fn breakdown_sums_exactly() {
        let (model, mut goal, mut state) = setup();
        goal.joint_pos[0] += 0.3;
        state.foot_slip_speed[1] = 0.2;
        state.foot_contact[0] = false;
        let a = state.joint_q.clone();
        let mut a2 = a.clone();
        a2[3] += 0.1;
        let w = RewardWeights::default();
        let b = compute_reward(&ctx(&model), &state, &a2, &a, &goal, &w, &[(0, 0.8)]).unwrap();
        let track = b.keybody_pos + b.joint_pos + b.joint_vel + b.root_pose + b.root_vel;
        let pen =
            b.feet_contact + b.feet_slip + b.joint_vel_penalty + b.action_rate + b.feet_air_time;
        assert_eq!(b.total_track, track);
        assert_eq!(b.total_penalty, pen);
        assert_eq!(b.total, track + pen);
        assert!((b.feet_air_time - 5.0 * (0.8 - 0.5)).abs() < 1e-12);
        assert!((b.feet_contact - (-5e-4)).abs() < 1e-18);
    }

    #[test]
    fn reward_invariant_to_world_yaw() {
        let model = SimModel::reference_humanoid();
        let mut frame = standing_frame(&model.tree);
        frame.root_lin_vel = Vector3::new(0.3, -0.1, 0.05);
        frame.root_ang_vel = Vector3::new(0.02, 0.1, -0.3);
        frame.root_quat = quat_from_rotvec(&Vector3::new(0.05, -0.08, 0.0));
        let mut goal_frame = frame.clone();
        goal_frame.joint_q[2] += 0.2;
        goal_frame.root_lin_vel = Vector3::new(-0.2, 0.4, 0.0);

        let w = RewardWeights::default();
        let eval = |yaw: f64| {
            let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
            let spin = |f: &crate::kinematics::MotionFrame| {
                let mut g = f.clone();
                g.root_pos = rot * f.root_pos;
                g.root_quat = rot * f.root_quat;
                g.root_lin_vel = rot * f.root_lin_vel;
                g.root_ang_vel = rot * f.root_ang_vel;
                g
            };
            let sf = spin(&frame);
            let gf = spin(&goal_frame);
            let goal = TrackingGoal::from_frame(&model.tree, &gf).unwrap();
            let mut state =
                SimState::from_frame(&sf, model.root_dofs(), model.contact_bodies.len());
            state.foot_contact = vec![true; model.contact_bodies.len()];
            let a = state.joint_q.clone();
            compute_reward(
                &RewardContext {
                    tree: &model.tree,
                    contact_bodies: &model.contact_bodies,
                    root_dofs: model.root_dofs(),
                },
                &state,
                &a,
                &a,
                &goal,
                &w,
                &[],
            )
            .unwrap()
        };
        let b0 = eval(0.0);
        for yaw in [0.7, -1.9, 2.9] {
            let b = eval(yaw);
            assert!((b.total - b0.total).abs() < 1e-9, "yaw {yaw}: {} vs {}", b.total, b0.total);
            assert!((b.keybody_pos - b0.keybody_pos).abs() < 1e-9);
            assert!((b.root_vel - b0.root_vel).abs() < 1e-9);
        }
    }
}
