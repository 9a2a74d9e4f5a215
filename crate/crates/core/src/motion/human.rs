//! Human mocap motion: named segments with world-frame poses per frame.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::math::{quat_from_wxyz, quat_to_wxyz};

use super::MotionError;

#[derive(Clone, Debug)]
pub struct HumanSegment {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest offset from the parent segment (m).
    pub rest_offset: Vector3<f64>,
}

/// World pose of every segment at one instant.
#[derive(Clone, Debug)]
pub struct HumanFrame {
    pub pos: Vec<Vector3<f64>>,
    pub quat: Vec<UnitQuaternion<f64>>,
}

/// Skeleton hierarchy plus world-frame segment poses at a fixed rate.
#[derive(Clone, Debug)]
pub struct HumanMotion {
    pub name: String,
    pub fps: f64,
    pub segments: Vec<HumanSegment>,
    pub frames: Vec<HumanFrame>,
}

impl HumanMotion {
    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn duration_s(&self) -> f64 {
        if self.frames.len() < 2 {
            0.0
        } else {
            (self.frames.len() - 1) as f64 / self.fps
        }
    }

    pub fn segment_index(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.fps <= 0.0 {
            return Err(MotionError::ClipFormat("fps must be positive".into()));
        }
        let n = self.segments.len();
        for (i, f) in self.frames.iter().enumerate() {
            if f.pos.len() != n || f.quat.len() != n {
                return Err(MotionError::ClipFormat(format!(
                    "frame {i} has {} segments, skeleton has {n}",
                    f.pos.len()
                )));
            }
            for q in &f.quat {
                if (q.into_inner().norm() - 1.0).abs() > 1e-6 {
                    return Err(MotionError::ClipFormat(format!("frame {i}: non-unit quaternion")));
                }
            }
            if f.pos.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
                return Err(MotionError::ClipFormat(format!("frame {i}: non-finite position")));
            }
        }
        Ok(())
    }

    /// Nearest frame at time `t` seconds, clamped to the clip.
    pub fn frame_at(&self, t: f64) -> &HumanFrame {
        let idx = (t * self.fps).round().max(0.0) as usize;
        &self.frames[idx.min(self.frames.len() - 1)]
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawHumanMotion {
            name: self.name.clone(),
            fps: self.fps,
            segments: self
                .segments
                .iter()
                .map(|s| RawSegment {
                    name: s.name.clone(),
                    parent: s.parent,
                    rest_offset: s.rest_offset.into(),
                })
                .collect(),
            frames: self
                .frames
                .iter()
                .map(|f| RawFrame {
                    pos: f.pos.iter().map(|p| (*p).into()).collect(),
                    quat: f.quat.iter().map(quat_to_wxyz).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("human motion serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, MotionError> {
        let raw: RawHumanMotion =
            serde_json::from_str(s).map_err(|e| MotionError::ClipFormat(e.to_string()))?;
        let motion = Self {
            name: raw.name,
            fps: raw.fps,
            segments: raw
                .segments
                .into_iter()
                .map(|s| HumanSegment {
                    name: s.name,
                    parent: s.parent,
                    rest_offset: Vector3::from(s.rest_offset),
                })
                .collect(),
            frames: raw
                .frames
                .into_iter()
                .map(|f| HumanFrame {
                    pos: f.pos.into_iter().map(Vector3::from).collect(),
                    quat: f.quat.into_iter().map(quat_from_wxyz).collect(),
                })
                .collect(),
        };
        motion.validate()?;
        Ok(motion)
    }
}

#[derive(Serialize, Deserialize)]
struct RawHumanMotion {
    name: String,
    fps: f64,
    segments: Vec<RawSegment>,
    frames: Vec<RawFrame>,
}

#[derive(Serialize, Deserialize)]
struct RawSegment {
    name: String,
    parent: Option<usize>,
    rest_offset: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    pos: Vec<[f64; 3]>,
    quat: Vec<[f64; 4]>,
}
