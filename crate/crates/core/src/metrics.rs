//! Tracking-error reports: per-body-part position errors, joint and root
//! RMSE, jerk, foot slip and fall rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kinematics::{forward_kinematics, KinematicsError, KinematicTree, TrackingGoal};
use crate::motion::{MotionClip, MotionError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("fps mismatch: reference {reference}, actual {actual}")]
    FpsMismatch { reference: f64, actual: f64 },
    #[error("clip too short for this metric: {frames} frames, need {need}")]
    TooShort { frames: usize, need: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Mean and RMS of one error stream, with the raw sums kept so reports
/// merge exactly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStat {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
}

impl ErrorStat {
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn rms(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sum_sq / self.count as f64).sqrt()
        }
    }

    pub fn merge(&mut self, other: &ErrorStat) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }
}

/// Tracking-quality report for one (reference, actual) clip pair, or an
/// aggregate over many.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrackingReport {
    pub name: String,
    /// Mean position error per body part, heading-local frame (m).
    pub body_part_local: BTreeMap<String, ErrorStat>,
    /// Mean position error per body part, world frame (m).
    pub body_part_world: BTreeMap<String, ErrorStat>,
    pub joint_angle_rad: ErrorStat,
    pub root_vel_m_s: ErrorStat,
    /// RMS jerk of the actual clip (rad/s³).
    pub jerk_rad_s3: f64,
    /// Foot tangential travel while in contact, per contact-second (m/s).
    pub foot_slip_m_per_s: f64,
    /// Episodes ending in a fall / total episodes, when known.
    pub falls: u64,
    pub episodes: u64,
    /// Frames compared.
    pub frames: u64,
}

impl TrackingReport {
    pub fn fall_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.falls as f64 / self.episodes as f64
        }
    }

    /// Summed mean local position error across body parts; the headline
    /// "sum of tracking error metrics" scalar.
    pub fn summed_body_error(&self) -> f64 {
        self.body_part_local.values().map(|s| s.mean()).sum()
    }

    /// Exact merge: combining reports equals the report of concatenated
    /// inputs because only sums and counts are stored.
    pub fn merge(&mut self, other: &TrackingReport) {
        for (k, v) in &other.body_part_local {
            self.body_part_local.entry(k.clone()).or_default().merge(v);
        }
        for (k, v) in &other.body_part_world {
            self.body_part_world.entry(k.clone()).or_default().merge(v);
        }
        self.joint_angle_rad.merge(&other.joint_angle_rad);
        self.root_vel_m_s.merge(&other.root_vel_m_s);
        // Jerk and slip are per-clip scalars; keep a frame-weighted mean.
        let (fa, fb) = (self.frames as f64, other.frames as f64);
        if fa + fb > 0.0 {
            self.jerk_rad_s3 = (self.jerk_rad_s3 * fa + other.jerk_rad_s3 * fb) / (fa + fb);
            self.foot_slip_m_per_s =
                (self.foot_slip_m_per_s * fa + other.foot_slip_m_per_s * fb) / (fa + fb);
        }
        self.falls += other.falls;
        self.episodes += other.episodes;
        self.frames += other.frames;
    }
}

/// Body part of a key body: the name with a trailing `_l`/`_r` stripped,
/// so hands, feet, knees and elbows aggregate across sides.
pub fn body_part_of(key_body_name: &str) -> String {
    key_body_name
        .trim_end_matches("_l")
        .trim_end_matches("_r")
        .to_string()
}

/// Per-body-part tracking errors between a reference clip and an actual
/// rollout. Clips must share fps; different lengths compare the overlap.
pub fn per_body_error(
    reference: &MotionClip,
    actual: &MotionClip,
    tree: &KinematicTree,
) -> Result<TrackingReport, MetricsError> {
    if (reference.fps - actual.fps).abs() > 1e-9 {
        return Err(MetricsError::FpsMismatch { reference: reference.fps, actual: actual.fps });
    }
    let n = reference.frames.len().min(actual.frames.len());
    let mut report = TrackingReport { name: reference.name.clone(), ..Default::default() };
    for t in 0..n {
        let rf = &reference.frames[t];
        let af = &actual.frames[t];
        let r_goal = TrackingGoal::from_frame(tree, rf)?;
        let a_goal = TrackingGoal::from_frame(tree, af)?;
        let r_fk = forward_kinematics(tree, rf)?;
        let a_fk = forward_kinematics(tree, af)?;
        for (k, kb) in tree.key_bodies.iter().enumerate() {
            let part = body_part_of(&kb.name);
            let local_err = (r_goal.key_body_pos[k] - a_goal.key_body_pos[k]).norm();
            let world_err = (r_fk.key_body_pos[k] - a_fk.key_body_pos[k]).norm();
            report.body_part_local.entry(part.clone()).or_default().push(local_err);
            report.body_part_world.entry(part).or_default().push(world_err);
        }
        for d in 0..tree.nq() {
            report.joint_angle_rad.push(rf.joint_q[d] - af.joint_q[d]);
        }
        report
            .root_vel_m_s
            .push((r_goal.root_lin_vel - a_goal.root_lin_vel).norm());
    }
    report.jerk_rad_s3 = smoothness(actual).unwrap_or(0.0);
    report.frames = n as u64;
    Ok(report)
}

/// RMS jerk from third-order central differences of the joint angles.
pub fn smoothness(clip: &MotionClip) -> Result<f64, MetricsError> {
    let n = clip.frames.len();
    if n < 5 {
        return Err(MetricsError::TooShort { frames: n, need: 5 });
    }
    let h = clip.dt();
    let nq = clip.nq();
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for t in 2..n - 2 {
        for d in 0..nq {
            let j = (clip.frames[t + 2].joint_q[d] - 2.0 * clip.frames[t + 1].joint_q[d]
                + 2.0 * clip.frames[t - 1].joint_q[d]
                - clip.frames[t - 2].joint_q[d])
                / (2.0 * h * h * h);
            sum_sq += j * j;
            count += 1;
        }
    }
    Ok((sum_sq / count as f64).sqrt())
}

/// Foot-slip distance per contact-second on a rollout, from per-frame
/// contact flags and slip speeds recorded by the simulator.
pub fn foot_slip_rate(slip_speeds: &[Vec<f64>], contacts: &[Vec<bool>], dt: f64) -> f64 {
    let mut travel = 0.0;
    let mut contact_time = 0.0;
    for (speeds, flags) in slip_speeds.iter().zip(contacts) {
        for (s, &c) in speeds.iter().zip(flags) {
            if c {
                travel += s * dt;
                contact_time += dt;
            }
        }
    }
    if contact_time > 0.0 {
        travel / contact_time
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::KinematicTree;
    use crate::motion::synthetic::{ik_test_clip, motion_clip, MotionFamily};
    use crate::motion::{ClipSource, MotionClip};
    use std::f64::consts::TAU;

    #[test]
    fn identical_clips_have_zero_error() {
        let tree = KinematicTree::reference_humanoid();
        let clip = motion_clip(&tree, MotionFamily::Wave, 1, 50.0, 2.0);
        let report = per_body_error(&clip, &clip, &tree).unwrap();
        for stat in report.body_part_local.values() {
            assert_eq!(stat.mean(), 0.0);
        }
        assert_eq!(report.joint_angle_rad.rms(), 0.0);
    }

    #[test]
    fn constructed_hand_offset_shows_in_hands_only() {
        let tree = KinematicTree::reference_humanoid();
        let reference = ik_test_clip(&tree, 9, 50.0, 1.0);
        let mut actual = reference.clone();
        // Shift both elbows equally: elbow key bodies sit at the forearm
        // origin, so a pure elbow rotation moves hands, not elbows.
        // Instead shift the root x to create a uniform world offset, which
        // the local frame removes; so use a joint offset on one shoulder.
        let dof = tree.dof_names().iter().position(|n| n == "shoulder_pitch_l").unwrap();
        for f in actual.frames.iter_mut() {
            f.joint_q[dof] += 0.08;
        }
        actual.recompute_velocities();
        let report = per_body_error(&reference, &actual, &tree).unwrap();
        let hands = report.body_part_local["hand"].mean();
        let feet = report.body_part_local["foot"].mean();
        let head = report.body_part_local["head"].mean();
        assert!(hands > 1e-3, "hands {hands}");
        assert_eq!(feet, 0.0);
        assert_eq!(head, 0.0);
    }

    #[test]
    fn merge_equals_concatenation_exactly() {
        let tree = KinematicTree::reference_humanoid();
        let a = motion_clip(&tree, MotionFamily::Sway, 2, 50.0, 1.0);
        let b = motion_clip(&tree, MotionFamily::Squat, 3, 50.0, 1.5);
        let mut noisy_a = a.clone();
        let mut noisy_b = b.clone();
        // Exact dyadic offset so sums stay bit-exact under reordering.
        for f in noisy_a.frames.iter_mut().chain(noisy_b.frames.iter_mut()) {
            f.joint_q[0] += 0.0625;
        }
        let ra = per_body_error(&a, &noisy_a, &tree).unwrap();
        let rb = per_body_error(&b, &noisy_b, &tree).unwrap();
        let mut merged = ra.clone();
        merged.merge(&rb);

        let concat_ref = MotionClip {
            name: "concat".into(),
            fps: 50.0,
            tree_id: tree.name.clone(),
            source: ClipSource::Synthetic,
            frames: a.frames.iter().chain(&b.frames).cloned().collect(),
        };
        let concat_act = MotionClip {
            frames: noisy_a.frames.iter().chain(&noisy_b.frames).cloned().collect(),
            ..concat_ref.clone()
        };
        let rc = per_body_error(&concat_ref, &concat_act, &tree).unwrap();
        for (k, v) in &rc.body_part_local {
            assert_eq!(v.count, merged.body_part_local[k].count);
            assert_eq!(v.sum, merged.body_part_local[k].sum, "part {k}");
        }
        assert_eq!(rc.joint_angle_rad.sum_sq, merged.joint_angle_rad.sum_sq);
    }

    #[test]
    fn constant_clip_has_zero_jerk() {
        let tree = KinematicTree::reference_humanoid();
        let mut clip = ik_test_clip(&tree, 4, 50.0, 1.0);
        let f0 = clip.frames[0].clone();
        for f in clip.frames.iter_mut() {
            *f = f0.clone();
        }
        assert_eq!(smoothness(&clip).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_angles_have_zero_jerk() {
        let tree = KinematicTree::reference_humanoid();
        let fps = 50.0;
        let mut clip = ik_test_clip(&tree, 4, fps, 1.0);
        for (k, f) in clip.frames.iter_mut().enumerate() {
            let t = k as f64 / fps;
            for d in 0..f.joint_q.len() {
                f.joint_q[d] = 0.3 * t * t;
            }
        }
        assert!(smoothness(&clip).unwrap() < 1e-9);
    }

    #[test]
    fn sinusoid_jerk_matches_analytic() {
        let tree = KinematicTree::reference_humanoid();
        let fps = 200.0;
        let freq = 0.5;
        let amp = 0.3;
        // Long window so edge truncation stays inside the 1% tolerance.
        let n = 2001;
        let mut frames = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 / fps;
            let mut f = crate::kinematics::MotionFrame::zeros(tree.nq());
            for d in 0..tree.nq() {
                f.joint_q[d] = amp * (TAU * freq * t).sin();
            }
            frames.push(f);
        }
        let clip = MotionClip {
            name: "sin".into(),
            fps,
            tree_id: tree.name.clone(),
            source: ClipSource::Synthetic,
            frames,
        };
        let got = smoothness(&clip).unwrap();
        let expect = amp * (TAU * freq).powi(3) / 2.0_f64.sqrt();
        assert!(
            (got - expect).abs() / expect < 0.01,
            "jerk {got} vs analytic {expect}"
        );
    }

    #[test]
    fn fps_mismatch_rejected() {
        let tree = KinematicTree::reference_humanoid();
        let a = motion_clip(&tree, MotionFamily::Sway, 2, 50.0, 1.0);
        let mut b = a.clone();
        b.fps = 60.0;
        assert!(matches!(per_body_error(&a, &b, &tree), Err(MetricsError::FpsMismatch { .. })));
    }
}
