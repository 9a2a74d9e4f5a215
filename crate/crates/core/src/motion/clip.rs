//! The canonical retargeted clip format and its JSONL file layout.
//!
//! Line 1 is a header object; every following line is one frame as a flat
//! array of numbers:
//! `[root_pos ×3, root_quat wxyz ×4, joint_q ×nq, root_lin_vel ×3,
//!   root_ang_vel ×3, joint_qd ×nq]`.
//! Numbers are written at full double precision so a read→write→read round
//! trip is bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{KinematicTree, MotionFrame};
use crate::math::{
    angular_velocity_between, quat_from_wxyz, quat_to_wxyz, slerp_shortest,
};

use super::MotionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipSource {
    OfflineRetarget,
    OnlineRetarget,
    Synthetic,
}

#[derive(Clone, Debug)]
pub struct MotionClip {
    pub name: String,
    pub fps: f64,
    /// Name of the kinematic tree this clip targets.
    pub tree_id: String,
    pub source: ClipSource,
    pub frames: Vec<MotionFrame>,
}

#[derive(Serialize, Deserialize)]
struct ClipHeader {
    name: String,
    fps: f64,
    tree_id: String,
    source: ClipSource,
    joint_names: Vec<String>,
}

/// Stored velocities may deviate from finite differences by at most this
/// fraction of the finite-difference RMS.
const VEL_RMS_TOLERANCE: f64 = 0.10;
/// RMS floor so static clips (0 vs 0) validate cleanly.
const VEL_RMS_FLOOR: f64 = 0.05;

impl MotionClip {
    pub fn nq(&self) -> usize {
        self.frames.first().map(|f| f.joint_q.len()).unwrap_or(0)
    }

    pub fn duration_s(&self) -> f64 {
        if self.frames.len() < 2 {
            0.0
        } else {
            (self.frames.len() - 1) as f64 / self.fps
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    /// Frame index for time `t`, clamped.
    pub fn frame_index_at(&self, t: f64) -> usize {
        let idx = (t * self.fps).round().max(0.0) as usize;
        idx.min(self.frames.len() - 1)
    }

    pub fn validate(&self, tree: &KinematicTree) -> Result<(), MotionError> {
        if self.frames.len() < 2 {
            return Err(MotionError::TooShort { frames: self.frames.len() });
        }
        if self.fps <= 0.0 {
            return Err(MotionError::ClipFormat("fps must be positive".into()));
        }
        for f in &self.frames {
            f.validate(tree)?;
        }
        self.check_velocity_consistency()?;
        Ok(())
    }

    /// Writers must store central-difference velocities; readers verify the
    /// stored values stay within tolerance of recomputed ones.
    pub fn check_velocity_consistency(&self) -> Result<(), MotionError> {
        let mut fd = self.clone();
        fd.recompute_velocities();
        let fields: [(&'static str, Box<dyn Fn(&MotionFrame) -> DVector<f64>>); 3] = [
            ("joint", Box::new(|f: &MotionFrame| f.joint_qd.clone())),
            ("root linear", Box::new(|f: &MotionFrame| DVector::from_column_slice(f.root_lin_vel.as_slice()))),
            ("root angular", Box::new(|f: &MotionFrame| DVector::from_column_slice(f.root_ang_vel.as_slice()))),
        ];
        for (name, get) in &fields {
            let mut err2 = 0.0;
            let mut ref2 = 0.0;
            let mut count = 0usize;
            for (a, b) in self.frames.iter().zip(&fd.frames) {
                let va = get(a);
                let vb = get(b);
                err2 += (va.clone() - vb.clone()).norm_squared();
                ref2 += vb.norm_squared();
                count += va.len();
            }
            let rms_err = (err2 / count as f64).sqrt();
            let rms_ref = (ref2 / count as f64).sqrt().max(VEL_RMS_FLOOR);
            if rms_err > VEL_RMS_TOLERANCE * rms_ref {
                return Err(MotionError::VelocityInconsistent {
                    field: name,
                    ratio: 100.0 * rms_err / rms_ref,
                });
            }
        }
        Ok(())
    }

    /// Overwrite stored velocities with central differences of the stored
    /// positions (one-sided at the ends).
    pub fn recompute_velocities(&mut self) {
        let n = self.frames.len();
        if n < 2 {
            return;
        }
        let dt = self.dt();
        let mut lin = Vec::with_capacity(n);
        let mut ang = Vec::with_capacity(n);
        let mut qd = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b, span) = if i == 0 {
                (0, 1, dt)
            } else if i == n - 1 {
                (n - 2, n - 1, dt)
            } else {
                (i - 1, i + 1, 2.0 * dt)
            };
            let fa = &self.frames[a];
            let fb = &self.frames[b];
            lin.push((fb.root_pos - fa.root_pos) / span);
            ang.push(angular_velocity_between(&fa.root_quat, &fb.root_quat, span));
            qd.push((&fb.joint_q - &fa.joint_q) / span);
        }
        for (i, f) in self.frames.iter_mut().enumerate() {
            f.root_lin_vel = lin[i];
            f.root_ang_vel = ang[i];
            f.joint_qd = qd[i].clone();
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W, joint_names: &[String]) -> Result<(), MotionError> {
        let header = ClipHeader {
            name: self.name.clone(),
            fps: self.fps,
            tree_id: self.tree_id.clone(),
            source: self.source,
            joint_names: joint_names.to_vec(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| MotionError::ClipFormat(e.to_string()))?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            let row = frame_to_row(f);
            serde_json::to_writer(&mut w, &row).map_err(|e| MotionError::ClipFormat(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self, joint_names: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf, joint_names).expect("in-memory write");
        String::from_utf8(buf).expect("jsonl is utf8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, MotionError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| MotionError::ClipFormat("empty clip file".into()))??;
        let header: ClipHeader = serde_json::from_str(&header_line)
            .map_err(|e| MotionError::ClipFormat(format!("header: {e}")))?;
        let nq = header.joint_names.len();
        let mut frames = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = serde_json::from_str(&line)
                .map_err(|e| MotionError::ClipFormat(format!("frame {i}: {e}")))?;
            frames.push(row_to_frame(&row, nq, i)?);
        }
        Ok(Self {
            name: header.name,
            fps: header.fps,
            tree_id: header.tree_id,
            source: header.source,
            frames,
        })
    }

    pub fn from_jsonl_str(s: &str) -> Result<Self, MotionError> {
        Self::read_jsonl(s.as_bytes())
    }

    pub fn save(&self, path: &Path, joint_names: &[String]) -> Result<(), MotionError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w, joint_names)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MotionError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }
}

fn frame_to_row(f: &MotionFrame) -> Vec<f64> {
    let mut row = Vec::with_capacity(13 + 2 * f.joint_q.len());
    row.extend_from_slice(f.root_pos.as_slice());
    row.extend_from_slice(&quat_to_wxyz(&f.root_quat));
    row.extend(f.joint_q.iter().copied());
    row.extend_from_slice(f.root_lin_vel.as_slice());
    row.extend_from_slice(f.root_ang_vel.as_slice());
    row.extend(f.joint_qd.iter().copied());
    row
}

fn row_to_frame(row: &[f64], nq: usize, index: usize) -> Result<MotionFrame, MotionError> {
    let expected = 13 + 2 * nq;
    if row.len() != expected {
        return Err(MotionError::ClipFormat(format!(
            "frame {index}: expected {expected} numbers, got {}",
            row.len()
        )));
    }
    let v = |i: usize| row[i];
    Ok(MotionFrame {
        root_pos: Vector3::new(v(0), v(1), v(2)),
        root_quat: quat_from_wxyz([v(3), v(4), v(5), v(6)]),
        joint_q: DVector::from_iterator(nq, row[7..7 + nq].iter().copied()),
        root_lin_vel: Vector3::new(v(7 + nq), v(8 + nq), v(9 + nq)),
        root_ang_vel: Vector3::new(v(10 + nq), v(11 + nq), v(12 + nq)),
        joint_qd: DVector::from_iterator(nq, row[13 + nq..13 + 2 * nq].iter().copied()),
    })
}

/// Resample a clip to `target_fps`: positions and joint angles interpolate
/// linearly, orientations by shortest-arc slerp; velocities are recomputed
/// by central differences. Duration is preserved to within one output frame
/// period.
pub fn resample(clip: &MotionClip, target_fps: f64) -> Result<MotionClip, MotionError> {
    if target_fps <= 0.0 {
        return Err(MotionError::ClipFormat("target fps must be positive".into()));
    }
    if clip.frames.len() < 2 {
        return Err(MotionError::TooShort { frames: clip.frames.len() });
    }
    let duration = clip.duration_s();
    let n_out = (duration * target_fps + 1e-9).floor() as usize + 1;
    let mut frames = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let t = k as f64 / target_fps;
        frames.push(sample_frame(clip, t));
    }
    let mut out = MotionClip {
        name: clip.name.clone(),
        fps: target_fps,
        tree_id: clip.tree_id.clone(),
        source: clip.source,
        frames,
    };
    out.recompute_velocities();
    Ok(out)
}

fn sample_frame(clip: &MotionClip, t: f64) -> MotionFrame {
    let s = (t * clip.fps).max(0.0);
    let i = (s.floor() as usize).min(clip.frames.len() - 2);
    let u = (s - i as f64).clamp(0.0, 1.0);
    let a = &clip.frames[i];
    let b = &clip.frames[i + 1];
    MotionFrame {
        root_pos: a.root_pos.lerp(&b.root_pos, u),
        root_quat: slerp_shortest(&a.root_quat, &b.root_quat, u),
        joint_q: &a.joint_q * (1.0 - u) + &b.joint_q * u,
        // Placeholder; recomputed from positions by the caller.
        root_lin_vel: Vector3::zeros(),
        root_ang_vel: Vector3::zeros(),
        joint_qd: DVector::zeros(a.joint_q.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::synthetic;

    fn test_clip() -> (KinematicTree, MotionClip) {
        let tree = KinematicTree::reference_humanoid();
        let clip = synthetic::ik_test_clip(&tree, 3, 120.0, 1.0);
        (tree, clip)
    }

    #[test]
    fn jsonl_round_trip_is_bit_identical() {
        let (tree, clip) = test_clip();
        let names = tree.dof_names();
        let s1 = clip.to_jsonl_string(&names);
        let clip2 = MotionClip::from_jsonl_str(&s1).unwrap();
        let s2 = clip2.to_jsonl_string(&names);
        assert_eq!(s1, s2);
        for (a, b) in clip.frames.iter().zip(&clip2.frames) {
            assert_eq!(a.root_pos, b.root_pos);
            assert_eq!(a.joint_q, b.joint_q);
            assert_eq!(a.root_quat.coords, b.root_quat.coords);
        }
    }

    #[test]
    fn resample_120_to_50_has_expected_count() {
        let (_, clip) = test_clip();
        assert_eq!(clip.frames.len(), 121);
        let out = resample(&clip, 50.0).unwrap();
        // 1.0 s duration → 50 or 51 frames.
        assert!(out.frames.len() == 50 || out.frames.len() == 51, "{}", out.frames.len());
        assert!((out.duration_s() - clip.duration_s()).abs() <= 1.0 / 50.0 + 1e-9);
    }

    #[test]
    fn resample_same_fps_is_identity() {
        let (_, clip) = test_clip();
        let out = resample(&clip, clip.fps).unwrap();
        assert_eq!(out.frames.len(), clip.frames.len());
        for (a, b) in clip.frames.iter().zip(&out.frames) {
            assert!((a.root_pos - b.root_pos).norm() < 1e-9);
            assert!((&a.joint_q - &b.joint_q).norm() < 1e-9);
            assert!((&a.joint_qd - &b.joint_qd).norm() < 1e-9);
            assert!((a.root_ang_vel - b.root_ang_vel).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_velocity_clip_resamples_exactly() {
        let tree = KinematicTree::reference_humanoid();
        let nq = tree.nq();
        let mut frames = Vec::new();
        let fps = 100.0;
        for k in 0..101 {
            let t = k as f64 / fps;
            let mut f = MotionFrame::zeros(nq);
            f.root_pos = Vector3::new(0.7 * t, -0.2 * t, 1.0);
            f.root_lin_vel = Vector3::new(0.7, -0.2, 0.0);
            for d in 0..nq {
                f.joint_q[d] = 0.3 * t;
                f.joint_qd[d] = 0.3;
            }
            frames.push(f);
        }
        let clip = MotionClip {
            name: "const".into(),
            fps,
            tree_id: tree.name.clone(),
            source: ClipSource::Synthetic,
            frames,
        };
        let out = resample(&clip, 42.0).unwrap();
        for f in &out.frames {
            assert!((f.root_lin_vel - Vector3::new(0.7, -0.2, 0.0)).norm() < 1e-6);
            for d in 0..nq {
                assert!((f.joint_qd[d] - 0.3).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn velocity_consistency_enforced() {
        let (tree, mut clip) = test_clip();
        clip.frames[10].joint_qd *= 0.0;
        for f in clip.frames.iter_mut() {
            f.joint_qd.fill(99.0);
        }
        assert!(matches!(
            clip.validate(&tree),
            Err(MotionError::VelocityInconsistent { .. })
        ));
    }

    #[test]
    fn too_short_clip_rejected() {
        let (tree, mut clip) = test_clip();
        clip.frames.truncate(1);
        assert!(matches!(clip.validate(&tree), Err(MotionError::TooShort { frames: 1 })));
        assert!(matches!(resample(&clip, 50.0), Err(MotionError::TooShort { .. })));
    }
}
