//! Feasibility filtering: joint limits/velocities, stair-like climbs and
//! root speed. Rules and thresholds are configuration, with documented
//! defaults.

use serde::{Deserialize, Serialize};

use crate::kinematics::KinematicTree;

use super::MotionClip;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationConfig {
    /// Maximum root speed (m/s).
    pub max_root_speed: f64,
    /// Window over which a sustained climb is measured (s).
    pub stair_window_s: f64,
    /// Root-height gain over the window that flags a clip stair-like (m).
    pub stair_climb_threshold_m: f64,
    /// Slack added to joint limits before flagging (rad).
    pub joint_limit_tolerance: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            max_root_speed: 3.0,
            stair_window_s: 2.0,
            stair_climb_threshold_m: 0.3,
            joint_limit_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurationReport {
    pub clip: String,
    pub accepted: bool,
    pub reasons: Vec<RuleViolation>,
}

/// Apply every rule to the clip; a clip is accepted iff no rule fires.
pub fn curate(clip: &MotionClip, tree: &KinematicTree, rules: &CurationConfig) -> CurationReport {
    let mut reasons = Vec::new();
    let nq = tree.nq();

    // Joint limits and velocity limits, per DOF, consecutive frames merged.
    for d in 0..nq {
        let joint = &tree.joints[tree.joint_of_dof(d)];
        let lo = joint.limits[0] - rules.joint_limit_tolerance;
        let hi = joint.limits[1] + rules.joint_limit_tolerance;
        let limit_frames: Vec<usize> = clip
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.joint_q[d] < lo || f.joint_q[d] > hi)
            .map(|(i, _)| i)
            .collect();
        push_ranges(&mut reasons, format!("joint_limits({})", joint.name), &limit_frames);

        let vel_frames: Vec<usize> = clip
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.joint_qd[d].abs() > joint.vel_limit)
            .map(|(i, _)| i)
            .collect();
        push_ranges(&mut reasons, format!("joint_velocity({})", joint.name), &vel_frames);
    }

    // Root speed.
    let speed_frames: Vec<usize> = clip
        .frames
        .iter()
        .enumerate()
        .filter(|(_, f)| f.root_lin_vel.norm() > rules.max_root_speed)
        .map(|(i, _)| i)
        .collect();
    push_ranges(&mut reasons, "root_speed".into(), &speed_frames);

    // Stair-like: sustained root-height gain over the window.
    let window = ((rules.stair_window_s * clip.fps).round() as usize).max(1);
    let n = clip.frames.len();
    let stair_frames: Vec<usize> = (0..n)
        .filter(|&s| {
            let e = (s + window).min(n - 1);
            e > s && clip.frames[e].root_pos.z - clip.frames[s].root_pos.z
                > rules.stair_climb_threshold_m
        })
        .collect();
    push_ranges(&mut reasons, "stair_like".into(), &stair_frames);

    CurationReport { clip: clip.name.clone(), accepted: reasons.is_empty(), reasons }
}

fn push_ranges(reasons: &mut Vec<RuleViolation>, rule: String, frames: &[usize]) {
    let mut it = frames.iter().copied();
    let Some(mut start) = it.next() else { return };
    let mut prev = start;
    for f in it {
        if f != prev + 1 {
            reasons.push(RuleViolation { rule: rule.clone(), start_frame: start, end_frame: prev });
            start = f;
        }
        prev = f;
    }
    reasons.push(RuleViolation { rule, start_frame: start, end_frame: prev });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::MotionFrame;
    use crate::motion::ClipSource;
    use nalgebra::Vector3;

    fn static_clip(tree: &KinematicTree, n: usize, fps: f64) -> MotionClip {
        let f = MotionFrame::zeros(tree.nq());
        MotionClip {
            name: "static".into(),
            fps,
            tree_id: tree.name.clone(),
            source: ClipSource::Synthetic,
            frames: vec![f; n],
        }
    }

    #[test]
    fn static_clip_accepted() {
        let tree = KinematicTree::reference_humanoid();
        let clip = static_clip(&tree, 100, 50.0);
        let report = curate(&clip, &tree, &CurationConfig::default());
        assert!(report.accepted);
        assert!(report.reasons.is_empty());
    }

    #[test]
    fn stair_ramp_rejected() {
        let tree = KinematicTree::reference_humanoid();
        // Monotone root z gain of 0.5 m over 2 s at 50 fps.
        let mut clip = static_clip(&tree, 101, 50.0);
        for (i, f) in clip.frames.iter_mut().enumerate() {
            f.root_pos = Vector3::new(0.0, 0.0, 0.25 * i as f64 / 50.0);
        }
        let report = curate(&clip, &tree, &CurationConfig::default());
        assert!(!report.accepted);
        assert!(report.reasons.iter().any(|r| r.rule == "stair_like"));
    }

    #[test]
    fn velocity_spike_flagged_with_range() {
        let tree = KinematicTree::reference_humanoid();
        let mut clip = static_clip(&tree, 50, 50.0);
        for i in 10..=12 {
            clip.frames[i].joint_qd[0] = 99.0;
        }
        let report = curate(&clip, &tree, &CurationConfig::default());
        assert!(!report.accepted);
        let v = report
            .reasons
            .iter()
            .find(|r| r.rule.starts_with("joint_velocity"))
            .expect("velocity violation");
        assert_eq!((v.start_frame, v.end_frame), (10, 12));
    }

    #[test]
    fn curation_is_order_independent() {
        let tree = KinematicTree::reference_humanoid();
        let mut a = static_clip(&tree, 60, 50.0);
        a.frames[5].joint_q[2] = 99.0;
        let b = static_clip(&tree, 60, 50.0);
        let cfg = CurationConfig::default();
        let ra1 = curate(&a, &tree, &cfg);
        let _ = curate(&b, &tree, &cfg);
        let ra2 = curate(&a, &tree, &cfg);
        assert_eq!(ra1.accepted, ra2.accepted);
        assert_eq!(ra1.reasons, ra2.reasons);
    }
}
