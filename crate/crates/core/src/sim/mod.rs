//! Reduced-DOF humanoid physics: articulated rigid-body dynamics with a
//! 1000 Hz PD inner loop behind a 50 Hz control interface, penalty ground
//! contact, domain randomization and scheduled pushes.

mod dynamics;
mod env;
mod model;

pub use env::{EpisodeRand, SimEnv, SimState, StepOutput, Termination};
pub use model::{
    reference_env_config, ContactConfig, DomainRandConfig, EnvConfig, InertiaConfig, PdConfig,
    SimModel, TerminationConfig, CONTROL_HZ, INNER_HZ, SUBSTEPS_PER_STEP,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("action dimension {got} does not match {expected} actuated DOFs")]
    ActionDimension { expected: usize, got: usize },
    #[error("body {0} is not a registered end effector")]
    NotEndEffector(String),
    #[error("reset frame has feet {depth:.3} m below ground (tolerance {tol:.3})")]
    FrameBelowGround { depth: f64, tol: f64 },
    #[error("simulation diverged at t={time:.3}s: {what}")]
    Diverged { time: f64, what: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
}
