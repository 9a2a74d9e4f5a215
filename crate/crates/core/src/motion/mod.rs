//! Human-motion ingestion, the canonical clip format, resampling and
//! dataset curation.

mod bvh;
mod clip;
mod curate;
mod human;
pub mod synthetic;

pub use bvh::parse_bvh;
pub use clip::{resample, ClipSource, MotionClip};
pub use curate::{curate, CurationConfig, CurationReport, RuleViolation};
pub use human::{HumanFrame, HumanMotion, HumanSegment};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("bvh syntax error at line {line}: {msg}")]
    BvhSyntax { line: usize, msg: String },
    #[error("bvh channel mismatch in data row {row}: expected {expected} values, got {got}")]
    ChannelMismatch { row: usize, expected: usize, got: usize },
    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },
    #[error("frame count mismatch: header declares {declared}, found {got}")]
    FrameCountMismatch { declared: usize, got: usize },
    #[error("clip format error: {0}")]
    ClipFormat(String),
    #[error("clip too short: {frames} frames (need at least 2)")]
    TooShort { frames: usize },
    #[error("stored {field} velocities deviate from finite differences by {ratio:.1}% RMS")]
    VelocityInconsistent { field: &'static str, ratio: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("kinematics: {0}")]
    Kinematics(#[from] crate::kinematics::KinematicsError),
}
