//! Core library for the TWIST humanoid teleoperation pipeline.
//!
//! The pipeline turns human motion into robot motion in four steps:
//! kinematic modelling ([`kinematics`]), motion ingestion and curation
//! ([`motion`]), retargeting onto the robot ([`retarget`]), and physics
//! simulation with tracking rewards ([`sim`], [`reward`]). [`metrics`]
//! evaluates how well a rollout tracked its reference.

pub mod kinematics;
pub mod math;
pub mod metrics;
pub mod motion;
pub mod retarget;
pub mod reward;
pub mod sim;

pub use kinematics::{JointKind, JointSpec, KeyBody, KinematicTree, MotionFrame, TrackingGoal};
pub use motion::{ClipSource, HumanMotion, MotionClip};
