//! Deterministic synthetic motion generators.
//!
//! These stand in for large mocap datasets at desk scale: sinusoidal
//! whole-body clips built directly on the robot model, plus derived "human"
//! motions on rescaled skeletons (so retargeting has a real embodiment gap
//! to cross) and BVH text for the ingestion path.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::kinematics::{
    forward_kinematics, JointKind, KinematicTree, MotionFrame,
};

use super::{ClipSource, HumanFrame, HumanMotion, HumanSegment, MotionClip};

/// Gentle standing pose: slight crouch so the PD loop has margin.
pub fn standing_q(tree: &KinematicTree) -> DVector<f64> {
    let mut q = DVector::zeros(tree.nq());
    for (d, name) in tree.dof_names().iter().enumerate() {
        q[d] = match name.as_str() {
            n if n.starts_with("hip_pitch") => -0.2,
            n if n.starts_with("knee") => 0.4,
            n if n.starts_with("ankle_pitch") => -0.2,
            n if n.starts_with("shoulder_pitch") => 0.2,
            n if n.starts_with("elbow") => -0.4,
            _ => 0.0,
        };
    }
    q
}

/// Standing frame with the root placed so the lowest foot touches z = 0.
pub fn standing_frame(tree: &KinematicTree) -> MotionFrame {
    let mut frame = MotionFrame::zeros(tree.nq());
    frame.joint_q = standing_q(tree);
    let fk = forward_kinematics(tree, &frame).expect("standing pose");
    let min_foot = tree
        .end_effectors
        .iter()
        .filter(|&&e| tree.key_bodies[e].name.starts_with("foot"))
        .map(|&e| fk.key_body_pos[e].z)
        .fold(f64::INFINITY, f64::min);
    if min_foot.is_finite() {
        frame.root_pos.z = -min_foot;
    }
    frame
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionFamily {
    Sway,
    Squat,
    Wave,
    Reach,
    March,
}

impl MotionFamily {
    pub const ALL: [MotionFamily; 5] =
        [Self::Sway, Self::Squat, Self::Wave, Self::Reach, Self::March];

    fn tag(self) -> &'static str {
        match self {
            Self::Sway => "sway",
            Self::Squat => "squat",
            Self::Wave => "wave",
            Self::Reach => "reach",
            Self::March => "march",
        }
    }
}

/// One sinusoid per DOF: `q_d(t) = center + amp·sin(2πf t + phase)`.
struct Oscillator {
    dof: usize,
    amp: f64,
    freq: f64,
    phase: f64,
}

/// A standing-centered whole-body clip of the given family. Deterministic
/// in (tree, family, seed); every clip starts exactly at the standing frame.
pub fn motion_clip(
    tree: &KinematicTree,
    family: MotionFamily,
    seed: u64,
    fps: f64,
    duration_s: f64,
) -> MotionClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7157_5a00 ^ family.tag().len() as u64);
    let names = tree.dof_names();
    let base = standing_frame(tree);
    let dof = |prefix: &str| -> Vec<usize> {
        names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(d, _)| d)
            .collect()
    };

    let mut osc: Vec<Oscillator> = Vec::new();
    let mut root_yaw_amp = 0.0;
    let mut crouch_amp = 0.0;
    let mut crouch_freq = 0.0;
    let mut march_amp = 0.0;
    let mut march_freq = 0.0;
    match family {
        MotionFamily::Sway => {
            let f = rng.random_range(0.2..0.45);
            for d in dof("hip_roll") {
                osc.push(Oscillator { dof: d, amp: rng.random_range(0.03..0.08), freq: f, phase: 0.0 });
            }
            for (i, d) in dof("shoulder_pitch").into_iter().enumerate() {
                osc.push(Oscillator {
                    dof: d,
                    amp: rng.random_range(0.15..0.35),
                    freq: f,
                    phase: if i == 0 { 0.0 } else { std::f64::consts::PI },
                });
            }
            root_yaw_amp = rng.random_range(0.0..0.08);
        }
        MotionFamily::Squat => {
            crouch_amp = rng.random_range(0.15..0.35);
            crouch_freq = rng.random_range(0.2..0.4);
            for d in dof("shoulder_pitch") {
                osc.push(Oscillator {
                    dof: d,
                    amp: rng.random_range(0.1..0.3),
                    freq: crouch_freq,
                    phase: 0.0,
                });
            }
        }
        MotionFamily::Wave => {
            let f = rng.random_range(0.3..0.6);
            let both = rng.random_bool(0.5);
            let shoulders = dof("shoulder_pitch");
            let elbows = dof("elbow");
            let picks = if both { vec![0, 1] } else { vec![usize::from(rng.random_bool(0.5))] };
            for &i in &picks {
                osc.push(Oscillator { dof: shoulders[i], amp: rng.random_range(0.3..0.6), freq: f, phase: 0.0 });
                osc.push(Oscillator { dof: elbows[i], amp: rng.random_range(0.2..0.5), freq: f, phase: 1.2 });
            }
        }
        MotionFamily::Reach => {
            let f = rng.random_range(0.15..0.3);
            for d in dof("shoulder_pitch") {
                osc.push(Oscillator { dof: d, amp: -rng.random_range(0.5..0.9), freq: f, phase: 0.0 });
            }
            for d in dof("elbow") {
                osc.push(Oscillator { dof: d, amp: rng.random_range(0.15..0.3), freq: f, phase: 0.0 });
            }
            for d in dof("torso_pitch") {
                osc.push(Oscillator { dof: d, amp: rng.random_range(0.1..0.25), freq: f, phase: 0.0 });
            }
        }
        MotionFamily::March => {
            march_amp = rng.random_range(0.12..0.25);
            march_freq = rng.random_range(0.3..0.5);
            for (i, d) in dof("shoulder_pitch").into_iter().enumerate() {
                osc.push(Oscillator {
                    dof: d,
                    amp: rng.random_range(0.1..0.25),
                    freq: march_freq,
                    phase: if i == 0 { 0.0 } else { std::f64::consts::PI },
                });
            }
        }
    }

    let hip_pitch = dof("hip_pitch");
    let knee = dof("knee");
    let ankle = dof("ankle_pitch");
    let n = (duration_s * fps).round() as usize + 1;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / fps;
        let mut f = base.clone();
        for o in &osc {
            f.joint_q[o.dof] += o.amp * (TAU * o.freq * t + o.phase).sin() - o.amp * o.phase.sin();
        }
        if crouch_amp > 0.0 {
            // Symmetric crouch keeps the feet planted: hip −h, knee 2h, ankle −h.
            let h = 0.2 + crouch_amp * (1.0 - (TAU * crouch_freq * t).cos()) / 2.0;
            for &d in &hip_pitch {
                f.joint_q[d] = -h;
            }
            for &d in &knee {
                f.joint_q[d] = 2.0 * h;
            }
            for &d in &ankle {
                f.joint_q[d] = -h;
            }
            f.root_pos.z = 0.10 + 0.70 * h.cos();
        }
        if march_amp > 0.0 {
            let s = (TAU * march_freq * t).sin();
            let (lift_l, lift_r) = (march_amp * s.max(0.0), march_amp * (-s).max(0.0));
            for (side, lift) in [(0usize, lift_l), (1usize, lift_r)] {
                f.joint_q[hip_pitch[side]] = -0.2 - 2.0 * lift;
                f.joint_q[knee[side]] = 0.4 + 2.5 * lift;
                f.joint_q[ankle[side]] = -0.2 - 0.5 * lift;
            }
        }
        if root_yaw_amp > 0.0 {
            f.root_quat = UnitQuaternion::from_axis_angle(
                &Vector3::z_axis(),
                root_yaw_amp * (TAU * 0.2 * t).sin(),
            );
        }
        tree.clamp_to_limits(&mut f.joint_q);
        frames.push(f);
    }
    let mut clip = MotionClip {
        name: format!("{}_{seed:04}", family.tag()),
        fps,
        tree_id: tree.name.clone(),
        source: ClipSource::Synthetic,
        frames,
    };
    clip.recompute_velocities();
    clip
}

/// Mid-range-centered sinusoids on every DOF, used by the retargeting
/// identity tests: the cold-start pose is exact at t = 0 and the motion is
/// slow enough for per-frame tracking.
pub fn ik_test_clip(tree: &KinematicTree, seed: u64, fps: f64, duration_s: f64) -> MotionClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1c_7e57);
    let mid = tree.mid_range_q();
    let (lo, hi) = tree.limit_vectors();
    let n = (duration_s * fps).round() as usize + 1;
    let nq = tree.nq();
    let osc: Vec<(f64, f64)> = (0..nq)
        .map(|d| {
            let span = 0.5 * (hi[d] - lo[d]);
            let amp = rng.random_range(0.1..0.4) * span.min(1.0);
            let freq = rng.random_range(0.15..0.35);
            (amp, freq)
        })
        .collect();
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / fps;
        let mut f = MotionFrame::zeros(nq);
        f.root_pos = Vector3::new(0.0, 0.0, 0.8);
        f.joint_q = mid.clone();
        for d in 0..nq {
            f.joint_q[d] += osc[d].0 * (TAU * osc[d].1 * t).sin();
        }
        tree.clamp_to_limits(&mut f.joint_q);
        frames.push(f);
    }
    let mut clip = MotionClip {
        name: format!("iksin_{seed:04}"),
        fps,
        tree_id: tree.name.clone(),
        source: ClipSource::Synthetic,
        frames,
    };
    clip.recompute_velocities();
    clip
}

/// Per-link scale factors mapping the robot tree onto a "human" skeleton.
#[derive(Clone, Debug)]
pub struct LimbScales {
    pub per_link: Vec<f64>,
}

impl LimbScales {
    pub fn identity(tree: &KinematicTree) -> Self {
        Self { per_link: vec![1.0; tree.num_links()] }
    }

    /// Sample one scale per root subtree in `1 ± spread`, mirrored across
    /// `_l`/`_r` name pairs so the skeleton stays symmetric.
    pub fn sampled(tree: &KinematicTree, seed: u64, spread: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1e);
        let mut per_link = vec![1.0; tree.num_links()];
        // Identify the subtree root (child of the free root) each link hangs from.
        let mut subtree = vec![0usize; tree.num_links()];
        for i in 1..tree.num_links() {
            let p = tree.joints[i].parent.unwrap();
            subtree[i] = if p == 0 { i } else { subtree[p] };
        }
        let mut by_group: HashMap<String, f64> = HashMap::new();
        for i in 1..tree.num_links() {
            let root_name = tree.joints[subtree[i]].name.clone();
            let group = root_name.trim_end_matches("_l").trim_end_matches("_r").to_string();
            let scale = *by_group
                .entry(group)
                .or_insert_with(|| rng.random_range(1.0 - spread..1.0 + spread));
            per_link[i] = scale;
        }
        Self { per_link }
    }

    /// Vertical scale applied to the root trajectory (leg subtree scale).
    fn root_scale(&self, tree: &KinematicTree) -> f64 {
        tree.joints
            .iter()
            .enumerate()
            .find(|(_, j)| j.name.starts_with("hip"))
            .map(|(i, _)| self.per_link[i])
            .unwrap_or(1.0)
    }
}

/// Skeleton layout shared by [`human_from_clip`] and [`bvh_from_clip`]:
/// one segment per link plus one leaf segment per key body.
fn human_segments(tree: &KinematicTree, scales: &LimbScales) -> Vec<HumanSegment> {
    let mut segments: Vec<HumanSegment> = tree
        .joints
        .iter()
        .enumerate()
        .map(|(i, j)| HumanSegment {
            name: j.name.clone(),
            parent: j.parent,
            rest_offset: j.offset * scales.per_link[i],
        })
        .collect();
    for kb in &tree.key_bodies {
        segments.push(HumanSegment {
            name: kb.name.clone(),
            parent: Some(kb.link),
            rest_offset: kb.offset * scales.per_link[kb.link],
        });
    }
    segments
}

/// Play a robot clip through a rescaled skeleton, producing the "human"
/// world-frame poses the retargeter will consume.
pub fn human_from_clip(clip: &MotionClip, tree: &KinematicTree, scales: &LimbScales) -> HumanMotion {
    let segments = human_segments(tree, scales);
    let n_links = tree.num_links();
    let root_scale = scales.root_scale(tree);
    let mut frames = Vec::with_capacity(clip.frames.len());
    for f in &clip.frames {
        let mut pos = vec![Vector3::zeros(); segments.len()];
        let mut quat = vec![UnitQuaternion::identity(); segments.len()];
        for (i, j) in tree.joints.iter().enumerate() {
            let (local_r, local_t) = match j.kind {
                JointKind::FreeRoot => (
                    f.root_quat,
                    Vector3::new(
                        f.root_pos.x * root_scale,
                        f.root_pos.y * root_scale,
                        f.root_pos.z * root_scale,
                    ),
                ),
                JointKind::Revolute => {
                    let q = f.joint_q[tree.dof_of_joint(i).unwrap()];
                    (
                        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(j.axis), q),
                        j.offset * scales.per_link[i],
                    )
                }
            };
            match j.parent {
                Some(p) => {
                    quat[i] = quat[p] * local_r;
                    pos[i] = pos[p] + quat[p] * local_t;
                }
                None => {
                    quat[i] = local_r;
                    pos[i] = local_t;
                }
            }
        }
        for (k, kb) in tree.key_bodies.iter().enumerate() {
            let i = n_links + k;
            quat[i] = quat[kb.link];
            pos[i] = pos[kb.link] + quat[kb.link] * (kb.offset * scales.per_link[kb.link]);
        }
        frames.push(HumanFrame { pos, quat });
    }
    HumanMotion { name: clip.name.clone(), fps: clip.fps, segments, frames }
}

/// Human frame whose segment poses are the robot's own FK output, bitwise.
/// Segment order matches [`human_from_clip`] with identity scales.
pub fn human_frame_from_robot_fk(tree: &KinematicTree, frame: &MotionFrame) -> HumanFrame {
    let fk = forward_kinematics(tree, frame).expect("frame matches tree");
    let mut pos: Vec<Vector3<f64>> =
        fk.link_transforms.iter().map(|t| t.translation.vector).collect();
    let mut quat: Vec<UnitQuaternion<f64>> =
        fk.link_transforms.iter().map(|t| t.rotation).collect();
    for (k, kb) in tree.key_bodies.iter().enumerate() {
        pos.push(fk.key_body_pos[k]);
        quat.push(fk.link_transforms[kb.link].rotation);
    }
    HumanFrame { pos, quat }
}

/// Additive capture noise mimicking a real-time mocap feed: per-frame jitter
/// on segment positions and orientations.
pub fn add_capture_noise(human: &mut HumanMotion, seed: u64, pos_sigma: f64, rot_sigma: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0153);
    let normal = |rng: &mut ChaCha8Rng| {
        // Box-Muller; two uniforms per draw keeps the stream simple.
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    };
    for f in &mut human.frames {
        for p in &mut f.pos {
            for i in 0..3 {
                p[i] += pos_sigma * normal(&mut rng);
            }
        }
        for q in &mut f.quat {
            let axis = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng));
            *q = crate::math::quat_from_rotvec(&(axis * rot_sigma)) * *q;
        }
    }
}

/// Identity body map for skeletons produced by [`human_from_clip`]: every
/// robot key body maps to the human segment of the same name.
pub fn identity_body_map(tree: &KinematicTree) -> Vec<(String, String)> {
    tree.key_bodies.iter().map(|kb| (kb.name.clone(), kb.name.clone())).collect()
}

/// Render a clip as BVH text on the rescaled skeleton. Root uses
/// `Zrotation Yrotation Xrotation` channels; revolute joints one channel
/// along their axis; key bodies become zero-channel leaf joints.
pub fn bvh_from_clip(clip: &MotionClip, tree: &KinematicTree, scales: &LimbScales) -> String {
    let mut out = String::from("HIERARCHY\n");
    let root_scale = scales.root_scale(tree);
    // children per link, key bodies keyed by link
    let mut child_joints: Vec<Vec<usize>> = vec![Vec::new(); tree.num_links()];
    for (i, j) in tree.joints.iter().enumerate() {
        if let Some(p) = j.parent {
            child_joints[p].push(i);
        }
    }
    let mut kb_of_link: Vec<Vec<usize>> = vec![Vec::new(); tree.num_links()];
    for (k, kb) in tree.key_bodies.iter().enumerate() {
        kb_of_link[kb.link].push(k);
    }

    fn axis_channel(axis: &Vector3<f64>) -> &'static str {
        if (axis - Vector3::x()).norm() < 1e-9 {
            "Xrotation"
        } else if (axis - Vector3::y()).norm() < 1e-9 {
            "Yrotation"
        } else if (axis - Vector3::z()).norm() < 1e-9 {
            "Zrotation"
        } else {
            panic!("bvh export supports axis-aligned revolute joints only")
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        out: &mut String,
        tree: &KinematicTree,
        scales: &LimbScales,
        child_joints: &[Vec<usize>],
        kb_of_link: &[Vec<usize>],
        link: usize,
        depth: usize,
        order: &mut Vec<usize>,
    ) {
        let ind = "  ".repeat(depth);
        let j = &tree.joints[link];
        let kw = if link == 0 { "ROOT" } else { "JOINT" };
        let off = if link == 0 { Vector3::zeros() } else { j.offset * scales.per_link[link] };
        out.push_str(&format!("{ind}{kw} {}\n{ind}{{\n", j.name));
        out.push_str(&format!("{ind}  OFFSET {:?} {:?} {:?}\n", off.x, off.y, off.z));
        if link == 0 {
            out.push_str(&format!(
                "{ind}  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation\n"
            ));
        } else {
            out.push_str(&format!("{ind}  CHANNELS 1 {}\n", axis_channel(&j.axis)));
        }
        order.push(link);
        for &c in &child_joints[link] {
            emit(out, tree, scales, child_joints, kb_of_link, c, depth + 1, order);
        }
        for &k in &kb_of_link[link] {
            let kb = &tree.key_bodies[k];
            let ko = kb.offset * scales.per_link[kb.link];
            out.push_str(&format!("{ind}  JOINT {}\n{ind}  {{\n", kb.name));
            out.push_str(&format!("{ind}    OFFSET {:?} {:?} {:?}\n", ko.x, ko.y, ko.z));
            out.push_str(&format!("{ind}    CHANNELS 0\n"));
            out.push_str(&format!(
                "{ind}    End Site\n{ind}    {{\n{ind}      OFFSET 0.0 0.0 0.0\n{ind}    }}\n"
            ));
            out.push_str(&format!("{ind}  }}\n"));
        }
        out.push_str(&format!("{ind}}}\n"));
    }

    let mut order = Vec::new();
    emit(&mut out, tree, scales, &child_joints, &kb_of_link, 0, 0, &mut order);

    out.push_str("MOTION\n");
    out.push_str(&format!("Frames: {}\n", clip.frames.len()));
    out.push_str(&format!("Frame Time: {:?}\n", 1.0 / clip.fps));
    for f in &clip.frames {
        let mut row: Vec<f64> = Vec::new();
        for &link in &order {
            if link == 0 {
                let p = f.root_pos * root_scale;
                let (roll, pitch, yaw) = f.root_quat.euler_angles();
                row.extend([p.x, p.y, p.z, yaw.to_degrees(), pitch.to_degrees(), roll.to_degrees()]);
            } else {
                let q = f.joint_q[tree.dof_of_joint(link).unwrap()];
                row.push(q.to_degrees());
            }
        }
        let text: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&text.join(" "));
        out.push('\n');
    }
    out
}

/// Convenience handle for the bundled data used across tests and the CLI.
pub fn bundled_training_clips(tree: &KinematicTree, count: usize, fps: f64) -> Vec<MotionClip> {
    (0..count)
        .map(|i| {
            let family = MotionFamily::ALL[i % MotionFamily::ALL.len()];
            motion_clip(tree, family, 1000 + i as u64, fps, 4.0)
        })
        .collect()
}

/// Held-out clips: same families, disjoint seeds, slightly longer.
pub fn bundled_heldout_clips(tree: &KinematicTree, count: usize, fps: f64) -> Vec<MotionClip> {
    (0..count)
        .map(|i| {
            let family = MotionFamily::ALL[i % MotionFamily::ALL.len()];
            motion_clip(tree, family, 9000 + i as u64, fps, 4.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::parse_bvh;

    #[test]
    fn standing_frame_feet_on_ground() {
        let tree = KinematicTree::reference_humanoid();
        let f = standing_frame(&tree);
        let fk = forward_kinematics(&tree, &f).unwrap();
        let feet: Vec<f64> = tree
            .end_effectors
            .iter()
            .filter(|&&e| tree.key_bodies[e].name.starts_with("foot"))
            .map(|&e| fk.key_body_pos[e].z)
            .collect();
        assert_eq!(feet.len(), 2);
        for z in feet {
            assert!(z.abs() < 1e-9, "foot at {z}");
        }
    }

    #[test]
    fn clips_start_at_standing_and_respect_limits() {
        let tree = KinematicTree::reference_humanoid();
        let base = standing_frame(&tree);
        let (lo, hi) = tree.limit_vectors();
        for family in MotionFamily::ALL {
            let clip = motion_clip(&tree, family, 7, 50.0, 3.0);
            assert!((&clip.frames[0].joint_q - &base.joint_q).norm() < 1e-9, "{family:?}");
            for f in &clip.frames {
                for d in 0..tree.nq() {
                    assert!(f.joint_q[d] >= lo[d] - 1e-12 && f.joint_q[d] <= hi[d] + 1e-12);
                }
            }
            clip.validate(&tree).unwrap();
        }
    }

    #[test]
    fn squat_feet_stay_planted() {
        let tree = KinematicTree::reference_humanoid();
        let clip = motion_clip(&tree, MotionFamily::Squat, 3, 50.0, 4.0);
        let feet: Vec<usize> = tree
            .end_effectors
            .iter()
            .filter(|&&e| tree.key_bodies[e].name.starts_with("foot"))
            .copied()
            .collect();
        for f in &clip.frames {
            let fk = forward_kinematics(&tree, f).unwrap();
            for &e in &feet {
                assert!(fk.key_body_pos[e].z.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bvh_round_trip_matches_human_motion() {
        let tree = KinematicTree::reference_humanoid();
        let clip = motion_clip(&tree, MotionFamily::Wave, 11, 50.0, 1.0);
        let scales = LimbScales::sampled(&tree, 4, 0.1);
        let direct = human_from_clip(&clip, &tree, &scales);
        let bvh = bvh_from_clip(&clip, &tree, &scales);
        let parsed = parse_bvh(&bvh, 1.0).unwrap();
        // Parsed skeleton has extra end-site leaves; match by name.
        for (si, seg) in direct.segments.iter().enumerate() {
            let pi = parsed.segment_index(&seg.name).expect("segment preserved");
            for (fa, fb) in direct.frames.iter().zip(&parsed.frames) {
                assert!(
                    (fa.pos[si] - fb.pos[pi]).norm() < 1e-9,
                    "segment {} drifted",
                    seg.name
                );
            }
        }
    }

    #[test]
    fn identity_scales_reproduce_key_bodies() {
        let tree = KinematicTree::reference_humanoid();
        let clip = motion_clip(&tree, MotionFamily::Reach, 5, 50.0, 1.0);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        for (f, hf) in clip.frames.iter().zip(&human.frames) {
            let fk = forward_kinematics(&tree, f).unwrap();
            for (k, kb) in tree.key_bodies.iter().enumerate() {
                let seg = human.segment_index(&kb.name).unwrap();
                assert!((fk.key_body_pos[k] - hf.pos[seg]).norm() < 1e-9);
            }
        }
    }
}
