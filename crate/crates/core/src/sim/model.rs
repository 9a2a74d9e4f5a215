//! Simulation model: tree + inertial properties + PD gains + contact and
//! randomization configuration.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{KinematicTree, TreeConfig};

use super::SimError;

pub const INNER_HZ: f64 = 1000.0;
pub const CONTROL_HZ: f64 = 50.0;
/// Fixed inner/outer rate contract: exactly 20 physics substeps per step.
pub const SUBSTEPS_PER_STEP: usize = (INNER_HZ / CONTROL_HZ) as usize;

pub const GRAVITY: f64 = 9.81;

/// Per-link mass properties (inertia about the com, link coordinates).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InertiaConfig {
    pub link: String,
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia_diag: [f64; 3],
}

/// Per-DOF PD gains and torque limits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub torque_limit: Vec<f64>,
}

/// Spring-damper normal + capped Coulomb friction at point feet.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactConfig {
    /// Normal spring stiffness (N/m).
    pub stiffness: f64,
    /// Normal damping (N·s/m).
    pub damping: f64,
    /// Tangential viscous slope before the Coulomb cap (N·s/m).
    pub tangential_scale: f64,
    /// Foot height at or below which the contact flag is set (m).
    pub ground_tolerance: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self { stiffness: 3.0e4, damping: 600.0, tangential_scale: 800.0, ground_tolerance: 0.005 }
    }
}

/// Domain randomization ranges. Defaults are the deployment set used for
/// all training runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainRandConfig {
    pub base_mass_delta_kg: [f64; 2],
    pub friction: [f64; 2],
    pub motor_strength: [f64; 2],
    pub gravity_delta: [f64; 2],
    pub push_base_vel: [f64; 2],
    pub push_ee_force_n: [f64; 2],
    /// Seconds between base pushes, sampled uniformly.
    pub base_push_interval_s: [f64; 2],
    /// Seconds between end-effector pushes, sampled uniformly.
    pub ee_push_interval_s: [f64; 2],
    pub ee_push_duration_s: f64,
    pub enable_base_push: bool,
    pub enable_ee_push: bool,
    /// Master switch; when false every episode uses nominal parameters.
    pub enabled: bool,
}

impl Default for DomainRandConfig {
    fn default() -> Self {
        Self {
            base_mass_delta_kg: [-3.0, 3.0],
            friction: [0.1, 2.0],
            motor_strength: [0.8, 1.2],
            gravity_delta: [-0.1, 0.1],
            push_base_vel: [-0.1, 0.1],
            push_ee_force_n: [0.0, 20.0],
            base_push_interval_s: [5.0, 8.0],
            ee_push_interval_s: [2.0, 4.0],
            ee_push_duration_s: 0.2,
            enable_base_push: true,
            enable_ee_push: true,
            enabled: true,
        }
    }
}

impl DomainRandConfig {
    /// Everything nominal, no pushes; for analytic tests.
    pub fn disabled() -> Self {
        Self { enabled: false, enable_base_push: false, enable_ee_push: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, r) in [
            ("base_mass_delta_kg", self.base_mass_delta_kg),
            ("friction", self.friction),
            ("motor_strength", self.motor_strength),
            ("gravity_delta", self.gravity_delta),
            ("push_base_vel", self.push_base_vel),
            ("push_ee_force_n", self.push_ee_force_n),
            ("base_push_interval_s", self.base_push_interval_s),
            ("ee_push_interval_s", self.ee_push_interval_s),
        ] {
            if r[0] > r[1] {
                return Err(SimError::InvalidModel(format!("{name} range lo > hi")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationConfig {
    pub min_root_height: f64,
    /// Maximum root tilt from vertical (rad); 60°.
    pub max_tilt: f64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self { min_root_height: 0.45, max_tilt: 60f64.to_radians() }
    }
}

/// Environment config file: everything but the tree itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvConfig {
    pub pd: PdConfig,
    pub inertia: Vec<InertiaConfig>,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub rand: DomainRandConfig,
    #[serde(default)]
    pub termination: TerminationConfig,
    /// Key bodies that touch the ground; defaults to end effectors whose
    /// name starts with "foot".
    #[serde(default)]
    pub contact_bodies: Vec<String>,
    /// Root is welded to the world (toy fixtures).
    #[serde(default)]
    pub fixed_base: bool,
}

impl EnvConfig {
    /// Gains and masses for the bundled reduced humanoid, also a usable
    /// fallback for other trees with the same naming scheme.
    pub fn default_for(tree: &KinematicTree) -> Self {
        let names = tree.dof_names();
        let mut kp = Vec::with_capacity(names.len());
        let mut kd = Vec::with_capacity(names.len());
        let mut torque = Vec::with_capacity(names.len());
        for n in &names {
            let (p, d, t) = match n.as_str() {
                s if s.starts_with("hip") => (120.0, 4.0, 90.0),
                s if s.starts_with("knee") => (120.0, 4.0, 90.0),
                s if s.starts_with("ankle") => (50.0, 2.0, 40.0),
                s if s.starts_with("torso") => (100.0, 4.0, 70.0),
                s if s.starts_with("shoulder") => (40.0, 1.5, 30.0),
                s if s.starts_with("elbow") => (20.0, 0.8, 15.0),
                _ => (50.0, 2.0, 40.0),
            };
            kp.push(p);
            kd.push(d);
            torque.push(t);
        }
        let inertia = tree
            .joints
            .iter()
            .map(|j| {
                let (mass, com, diag) = match j.name.as_str() {
                    "root" => (8.0, [0.0, 0.0, 0.0], [0.10, 0.10, 0.08]),
                    "torso_pitch" => (6.0, [0.0, 0.0, 0.18], [0.12, 0.12, 0.06]),
                    s if s.starts_with("hip_pitch") => (0.8, [0.0, 0.0, 0.0], [0.004, 0.004, 0.004]),
                    s if s.starts_with("hip_roll") => (2.0, [0.0, 0.0, -0.17], [0.022, 0.022, 0.004]),
                    s if s.starts_with("knee") => (1.5, [0.0, 0.0, -0.17], [0.016, 0.016, 0.003]),
                    s if s.starts_with("ankle") => (0.5, [0.02, 0.0, -0.03], [0.002, 0.002, 0.002]),
                    s if s.starts_with("shoulder") => (0.8, [0.0, 0.0, -0.11], [0.004, 0.004, 0.001]),
                    s if s.starts_with("elbow") => (0.6, [0.0, 0.0, -0.10], [0.003, 0.003, 0.001]),
                    _ => (1.0, [0.0, 0.0, 0.0], [0.01, 0.01, 0.01]),
                };
                InertiaConfig { link: j.name.clone(), mass, com, inertia_diag: diag }
            })
            .collect();
        Self {
            pd: PdConfig { kp, kd, torque_limit: torque },
            inertia,
            contact: ContactConfig::default(),
            rand: DomainRandConfig::default(),
            termination: TerminationConfig::default(),
            contact_bodies: Vec::new(),
            fixed_base: false,
        }
    }
}

/// Fully resolved simulation model.
#[derive(Clone, Debug)]
pub struct SimModel {
    pub tree: KinematicTree,
    pub mass: Vec<f64>,
    pub com: Vec<Vector3<f64>>,
    pub i_com: Vec<Matrix3<f64>>,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub torque_limit: Vec<f64>,
    pub contact: ContactConfig,
    pub termination: TerminationConfig,
    /// Key-body indices used as ground contact points.
    pub contact_bodies: Vec<usize>,
    pub fixed_base: bool,
}

impl SimModel {
    pub fn new(tree: KinematicTree, cfg: &EnvConfig) -> Result<Self, SimError> {
        let n_links = tree.num_links();
        let nq = tree.nq();
        if cfg.pd.kp.len() != nq || cfg.pd.kd.len() != nq || cfg.pd.torque_limit.len() != nq {
            return Err(SimError::InvalidModel(format!(
                "pd gain vectors must have {nq} entries"
            )));
        }
        if cfg.pd.kp.iter().chain(&cfg.pd.kd).any(|v| *v < 0.0) {
            return Err(SimError::InvalidModel("pd gains must be ≥ 0".into()));
        }
        cfg.rand.validate()?;
        let mut mass = vec![0.0; n_links];
        let mut com = vec![Vector3::zeros(); n_links];
        let mut i_com = vec![Matrix3::zeros(); n_links];
        let mut seen = vec![false; n_links];
        for ic in &cfg.inertia {
            let Some(idx) = tree.joints.iter().position(|j| j.name == ic.link) else {
                return Err(SimError::InvalidModel(format!("inertia for unknown link {}", ic.link)));
            };
            mass[idx] = ic.mass;
            com[idx] = Vector3::from(ic.com);
            i_com[idx] = Matrix3::from_diagonal(&Vector3::from(ic.inertia_diag));
            seen[idx] = true;
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                return Err(SimError::InvalidModel(format!(
                    "link {} has no inertia entry",
                    tree.joints[i].name
                )));
            }
        }
        let contact_bodies = if cfg.contact_bodies.is_empty() {
            tree.end_effectors
                .iter()
                .copied()
                .filter(|&e| tree.key_bodies[e].name.starts_with("foot"))
                .collect()
        } else {
            let mut out = Vec::new();
            for name in &cfg.contact_bodies {
                let Some(k) = tree.key_body_index(name) else {
                    return Err(SimError::InvalidModel(format!("unknown contact body {name}")));
                };
                out.push(k);
            }
            out
        };
        Ok(Self {
            tree,
            mass,
            com,
            i_com,
            kp: cfg.pd.kp.clone(),
            kd: cfg.pd.kd.clone(),
            torque_limit: cfg.pd.torque_limit.clone(),
            contact: cfg.contact.clone(),
            termination: cfg.termination.clone(),
            contact_bodies,
            fixed_base: cfg.fixed_base,
        })
    }

    pub fn reference_humanoid() -> Self {
        let tree = KinematicTree::reference_humanoid();
        let cfg = EnvConfig::default_for(&tree);
        Self::new(tree, &cfg).expect("bundled model is valid")
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Generalized velocity dimension (0 root DOFs when the base is fixed).
    pub fn nv(&self) -> usize {
        self.root_dofs() + self.tree.nq()
    }

    pub fn root_dofs(&self) -> usize {
        if self.fixed_base {
            0
        } else {
            6
        }
    }
}

/// Env config bundled next to the reference tree (see `twist gen-data`).
pub fn reference_env_config() -> (TreeConfig, EnvConfig) {
    let tree = KinematicTree::reference_humanoid();
    let cfg = EnvConfig::default_for(&tree);
    (tree.to_config(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_resolves() {
        let model = SimModel::reference_humanoid();
        assert_eq!(model.contact_bodies.len(), 2);
        // 8 + 6 + 2·(0.8+2.0+1.5+0.5) + 2·(0.8+0.6)
        assert!((model.total_mass() - 26.4).abs() < 1e-9);
        assert_eq!(model.nv(), 19);
    }

    #[test]
    fn table_defaults_match_deployment_ranges() {
        let r = DomainRandConfig::default();
        assert_eq!(r.base_mass_delta_kg, [-3.0, 3.0]);
        assert_eq!(r.friction, [0.1, 2.0]);
        assert_eq!(r.motor_strength, [0.8, 1.2]);
        assert_eq!(r.gravity_delta, [-0.1, 0.1]);
        assert_eq!(r.push_base_vel, [-0.1, 0.1]);
        assert_eq!(r.push_ee_force_n, [0.0, 20.0]);
    }

    #[test]
    fn missing_inertia_rejected() {
        let tree = KinematicTree::reference_humanoid();
        let mut cfg = EnvConfig::default_for(&tree);
        cfg.inertia.pop();
        assert!(SimModel::new(tree, &cfg).is_err());
    }
}
