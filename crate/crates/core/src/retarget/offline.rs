//! Offline retargeting: damped Gauss-Newton sweeps over all frames with a
//! temporal-smoothness term. Starts from the online solution and accepts
//! only improving per-frame steps, so the objective never increases across
//! sweeps and the result dominates the online output.

use nalgebra::{DMatrix, DVector};

use crate::kinematics::{forward_kinematics, KinematicTree, MotionFrame};
use crate::motion::{ClipSource, HumanMotion, MotionClip};

use super::objective::{clip_objective, frame_targets, tracking_residual, FrameTargets};
use super::online::retarget_online_clip;
use super::{RetargetConfig, RetargetError, RetargetMap};

const BACKTRACK_STEPS: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];
const REL_TOL: f64 = 1e-12;

pub fn retarget_offline(
    human: &HumanMotion,
    tree: &KinematicTree,
    cfg: &RetargetConfig,
) -> Result<MotionClip, RetargetError> {
    retarget_offline_with_trace(human, tree, cfg).map(|(clip, _)| clip)
}

/// As [`retarget_offline`], also returning the objective value after the
/// initial pass and after each sweep.
pub fn retarget_offline_with_trace(
    human: &HumanMotion,
    tree: &KinematicTree,
    cfg: &RetargetConfig,
) -> Result<(MotionClip, Vec<f64>), RetargetError> {
    let map = RetargetMap::resolve(tree, human, cfg)?;
    let (init, _) = retarget_online_clip(human, tree, cfg)?;
    let mut clip = init;
    clip.source = ClipSource::OfflineRetarget;

    let targets: Vec<FrameTargets> =
        human.frames.iter().map(|hf| frame_targets(&map, hf)).collect();
    let n_frames = clip.frames.len();

    let mut trace = vec![clip_objective(tree, cfg, &map, &clip, human).weighted_total(cfg)];
    let mut rises = 0usize;
    for sweep in 0..cfg.max_iters {
        for t in 0..n_frames {
            refine_frame(tree, cfg, &map, &targets, &mut clip.frames, t);
        }
        let obj = clip_objective(tree, cfg, &map, &clip, human);
        let total = obj.weighted_total(cfg);
        let prev = *trace.last().expect("trace starts non-empty");
        if total > prev + REL_TOL * prev.max(1.0) {
            rises += 1;
            if rises >= 2 {
                return Err(RetargetError::NonConvergent {
                    sweep,
                    pos: obj.position_m2,
                    ori: obj.orientation_rad2,
                    smooth: obj.smoothness_rad2,
                });
            }
        } else {
            rises = 0;
        }
        let converged = prev - total <= REL_TOL * prev.max(1.0);
        trace.push(total);
        if converged {
            break;
        }
    }

    clip.recompute_velocities();
    Ok((clip, trace))
}

/// One damped Gauss-Newton step on frame `t`, backtracking until the local
/// objective piece decreases; leaves the frame unchanged otherwise.
fn refine_frame(
    tree: &KinematicTree,
    cfg: &RetargetConfig,
    map: &RetargetMap,
    targets: &[FrameTargets],
    frames: &mut [MotionFrame],
    t: usize,
) {
    let nq = tree.nq();
    let n_frames = frames.len();
    let sw_s = cfg.smooth_weight.sqrt();

    let fk = forward_kinematics(tree, &frames[t]).expect("frame matches tree");
    let (r_track, j_track) = tracking_residual(tree, cfg, map, &targets[t], &fk);

    // Second-difference residuals touching q_t, with their ∂/∂q_t factors.
    let mut smooth_rows: Vec<(DVector<f64>, f64)> = Vec::new();
    if cfg.smooth_weight > 0.0 {
        if t >= 2 {
            let s = &frames[t].joint_q - 2.0 * &frames[t - 1].joint_q + &frames[t - 2].joint_q;
            smooth_rows.push((s, 1.0));
        }
        if t >= 1 && t + 1 < n_frames {
            let s = &frames[t + 1].joint_q - 2.0 * &frames[t].joint_q + &frames[t - 1].joint_q;
            smooth_rows.push((s, -2.0));
        }
        if t + 2 < n_frames {
            let s = &frames[t + 2].joint_q - 2.0 * &frames[t + 1].joint_q + &frames[t].joint_q;
            smooth_rows.push((s, 1.0));
        }
    }

    let rows = r_track.len() + nq * smooth_rows.len();
    let mut r = DVector::zeros(rows);
    let mut jac = DMatrix::zeros(rows, nq);
    r.rows_mut(0, r_track.len()).copy_from(&r_track);
    jac.rows_mut(0, r_track.len()).copy_from(&j_track);
    for (k, (s, dq_factor)) in smooth_rows.iter().enumerate() {
        let base = r_track.len() + k * nq;
        for d in 0..nq {
            r[base + d] = -sw_s * s[d];
            jac[(base + d, d)] = sw_s * dq_factor;
        }
    }

    // Damped normal equations (n×n): (JᵀJ + λI) Δq = Jᵀ r.
    let jt = jac.transpose();
    let a = &jt * &jac + DMatrix::identity(nq, nq) * cfg.dls_damping;
    let Some(ch) = a.cholesky() else { return };
    let dq = ch.solve(&(&jt * &r));

    let phi_0 = local_objective(tree, cfg, map, targets, frames, t, &frames[t].joint_q);
    for alpha in BACKTRACK_STEPS {
        let mut q = &frames[t].joint_q + &dq * alpha;
        tree.clamp_to_limits(&mut q);
        let phi = local_objective(tree, cfg, map, targets, frames, t, &q);
        if phi < phi_0 {
            frames[t].joint_q = q;
            return;
        }
    }
}

/// The objective terms that depend on q_t: tracking at t plus the second
/// differences at t−1, t, t+1.
fn local_objective(
    tree: &KinematicTree,
    cfg: &RetargetConfig,
    map: &RetargetMap,
    targets: &[FrameTargets],
    frames: &[MotionFrame],
    t: usize,
    q: &DVector<f64>,
) -> f64 {
    let mut frame = frames[t].clone();
    frame.joint_q = q.clone();
    let fk = forward_kinematics(tree, &frame).expect("frame matches tree");
    let mut total = 0.0;
    for (i, pair) in map.pairs.iter().enumerate() {
        total += cfg.pos_weight
            * (targets[t].pos[i] - fk.key_body_pos[pair.key_body]).norm_squared();
        let cur = fk.key_body_rot(tree, pair.key_body);
        total += cfg.ori_weight
            * cfg.rot_to_m
            * cfg.rot_to_m
            * crate::math::rotvec(&(targets[t].rot[i] * cur.inverse())).norm_squared();
    }
    if cfg.smooth_weight > 0.0 {
        let n = frames.len();
        let get = |i: usize| -> &DVector<f64> {
            if i == t {
                q
            } else {
                &frames[i].joint_q
            }
        };
        for c in [t as i64 - 1, t as i64, t as i64 + 1] {
            if c >= 1 && (c as usize) + 1 < n {
                let c = c as usize;
                let s = get(c + 1) - 2.0 * get(c) + get(c - 1);
                total += cfg.smooth_weight * s.norm_squared();
            }
        }
    }
    total
}
