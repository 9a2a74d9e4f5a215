//! Kinematic-tree model: forward kinematics, analytic Jacobians and
//! heading-local transforms.
//!
//! Trees are immutable after construction, so every operation here is a pure
//! function and safe to call concurrently.

mod fk;
mod frame;
mod jacobian;
mod local;
mod tree;

pub use fk::{forward_kinematics, FkResult};
pub use frame::MotionFrame;
pub use jacobian::jacobian;
pub use local::{local_to_world_vec, world_to_local_vec, TrackingGoal};
pub use tree::{JointKind, JointSpec, KeyBody, KinematicTree, TreeConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("dimension mismatch: expected {expected} joint DOFs, frame has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid key body index {index} (tree has {count})")]
    InvalidKeyBody { index: usize, count: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}
