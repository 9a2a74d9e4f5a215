//! Human→robot motion retargeting.
//!
//! Two paths share one objective: an offline multi-sweep optimizer with a
//! temporal-smoothness term, and an online single-step damped-least-squares
//! retargeter for real-time use. Both jointly penalize key-body position
//! and orientation error; the offline output always dominates the online
//! output on the shared objective because it starts from the online
//! solution and only accepts improving steps.

mod config;
mod objective;
mod offline;
mod online;

pub use config::{RetargetConfig, RetargetMap};
pub use objective::{clip_objective, objective_breakdown, ObjectiveBreakdown};
pub use offline::retarget_offline;
pub use online::{retarget_online_clip, OnlineRetargeter, RetargetState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetargetError {
    #[error("body map does not cover key body {0}")]
    BodyMapIncomplete(String),
    #[error("body map maps two human segments to key body {0}")]
    BodyMapNotInjective(String),
    #[error("body map references unknown human segment {0}")]
    UnknownSegment(String),
    #[error("body map references unknown key body {0}")]
    UnknownKeyBody(String),
    #[error("non-finite value in human frame")]
    NanInput,
    #[error("offline retarget did not converge at sweep {sweep}: objective rose twice \
             (position {pos:.6e} m², orientation {ori:.6e} rad², smoothness {smooth:.6e})")]
    NonConvergent { sweep: usize, pos: f64, ori: f64, smooth: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
}
