//! The simulation environment: 20 semi-implicit Euler substeps per control
//! step, PD torques, penalty ground contact, scheduled pushes and
//! per-episode domain randomization.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{forward_kinematics, MotionFrame};
use crate::math::{heading_quat, quat_from_rotvec};

use super::dynamics::{bias_forces, compute_kinematics, mass_matrix, mechanical_energy, LinkKin, Wrench};
use super::model::{SimModel, GRAVITY, INNER_HZ, SUBSTEPS_PER_STEP};
use super::{DomainRandConfig, SimError};

/// Full simulator state. `v` is the generalized velocity: body-frame root
/// twist (ω, v) then joint rates; joint rates only for fixed-base models.
#[derive(Clone, Debug)]
pub struct SimState {
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    pub joint_q: DVector<f64>,
    pub v: DVector<f64>,
    pub foot_contact: Vec<bool>,
    /// Time since last liftoff per contact body (s); 0 while in contact.
    pub foot_air_time: Vec<f64>,
    /// Tangential speed of each contact body while in contact (m/s).
    pub foot_slip_speed: Vec<f64>,
    pub time_s: f64,
    pub step_count: u64,
}

impl SimState {
    /// Kinematic state from a motion frame, with cleared contact trackers.
    pub fn from_frame(frame: &MotionFrame, root_dofs: usize, n_contact: usize) -> Self {
        let nq = frame.joint_q.len();
        let mut v = DVector::zeros(root_dofs + nq);
        if root_dofs == 6 {
            let rt = frame.root_quat.inverse();
            let w = rt * frame.root_ang_vel;
            let l = rt * frame.root_lin_vel;
            for k in 0..3 {
                v[k] = w[k];
                v[3 + k] = l[k];
            }
        }
        for d in 0..nq {
            v[root_dofs + d] = frame.joint_qd[d];
        }
        Self {
            root_pos: frame.root_pos,
            root_quat: frame.root_quat,
            joint_q: frame.joint_q.clone(),
            v,
            foot_contact: vec![false; n_contact],
            foot_air_time: vec![0.0; n_contact],
            foot_slip_speed: vec![0.0; n_contact],
            time_s: 0.0,
            step_count: 0,
        }
    }

    pub fn joint_qd(&self, root_dofs: usize) -> DVector<f64> {
        self.v.rows(root_dofs, self.v.len() - root_dofs).into_owned()
    }

    /// World-frame root angular velocity.
    pub fn root_ang_vel_world(&self) -> Vector3<f64> {
        if self.v.len() < 6 {
            return Vector3::zeros();
        }
        self.root_quat * Vector3::new(self.v[0], self.v[1], self.v[2])
    }

    /// World-frame root linear velocity.
    pub fn root_lin_vel_world(&self) -> Vector3<f64> {
        if self.v.len() < 6 {
            return Vector3::zeros();
        }
        self.root_quat * Vector3::new(self.v[3], self.v[4], self.v[5])
    }

    /// Snapshot as a motion frame (world-frame velocities).
    pub fn to_frame(&self, root_dofs: usize) -> MotionFrame {
        MotionFrame {
            root_pos: self.root_pos,
            root_quat: self.root_quat,
            joint_q: self.joint_q.clone(),
            root_lin_vel: self.root_lin_vel_world(),
            root_ang_vel: self.root_ang_vel_world(),
            joint_qd: self.joint_qd(root_dofs),
        }
    }
}

/// Per-episode randomization draw; logged for reproducibility.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeRand {
    pub base_mass_delta: f64,
    pub friction: f64,
    pub motor_scale: f64,
    pub gravity: f64,
    pub next_base_push_s: f64,
    pub next_ee_push_s: f64,
}

impl EpisodeRand {
    fn nominal() -> Self {
        Self {
            base_mass_delta: 0.0,
            friction: 1.0,
            motor_scale: 1.0,
            gravity: GRAVITY,
            next_base_push_s: f64::INFINITY,
            next_ee_push_s: f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    RootTooLow,
    TiltedOver,
    Diverged,
}

/// Result of one 50 Hz control step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub proprio: DVector<f64>,
    pub terminated: Option<Termination>,
    /// Contact bodies that touched down during this step, with the air
    /// time they accumulated since liftoff (s).
    pub touchdowns: Vec<(usize, f64)>,
}

struct ActivePush {
    key_body: usize,
    force_world: Vector3<f64>,
    until_s: f64,
}

pub struct SimEnv {
    model: SimModel,
    /// Root mass before the per-episode delta.
    nominal_root_mass: f64,
    rand_cfg: DomainRandConfig,
    rng: ChaCha8Rng,
    episode: EpisodeRand,
    state: SimState,
    last_action: DVector<f64>,
    active_pushes: Vec<ActivePush>,
}

impl SimEnv {
    pub fn new(model: SimModel, rand_cfg: DomainRandConfig, seed: u64) -> Self {
        let nq = model.tree.nq();
        let nv = model.nv();
        let n_contact = model.contact_bodies.len();
        let nominal_root_mass = model.mass[0];
        Self {
            model,
            nominal_root_mass,
            rand_cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            episode: EpisodeRand::nominal(),
            state: SimState {
                root_pos: Vector3::zeros(),
                root_quat: UnitQuaternion::identity(),
                joint_q: DVector::zeros(nq),
                v: DVector::zeros(nv),
                foot_contact: vec![false; n_contact],
                foot_air_time: vec![0.0; n_contact],
                foot_slip_speed: vec![0.0; n_contact],
                time_s: 0.0,
                step_count: 0,
            },
            last_action: DVector::zeros(nq),
            active_pushes: Vec::new(),
        }
    }

    pub fn model(&self) -> &SimModel {
        &self.model
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn episode_rand(&self) -> &EpisodeRand {
        &self.episode
    }

    pub fn last_action(&self) -> &DVector<f64> {
        &self.last_action
    }

    fn sample_episode(&mut self) -> EpisodeRand {
        if !self.rand_cfg.enabled {
            let mut ep = EpisodeRand::nominal();
            if self.rand_cfg.enable_base_push {
                ep.next_base_push_s = self.sample_range(self.rand_cfg.base_push_interval_s);
            }
            if self.rand_cfg.enable_ee_push {
                ep.next_ee_push_s = self.sample_range(self.rand_cfg.ee_push_interval_s);
            }
            return ep;
        }
        EpisodeRand {
            base_mass_delta: self.sample_range(self.rand_cfg.base_mass_delta_kg),
            friction: self.sample_range(self.rand_cfg.friction),
            motor_scale: self.sample_range(self.rand_cfg.motor_strength),
            gravity: GRAVITY + self.sample_range(self.rand_cfg.gravity_delta),
            next_base_push_s: if self.rand_cfg.enable_base_push {
                self.sample_range(self.rand_cfg.base_push_interval_s)
            } else {
                f64::INFINITY
            },
            next_ee_push_s: if self.rand_cfg.enable_ee_push {
                self.sample_range(self.rand_cfg.ee_push_interval_s)
            } else {
                f64::INFINITY
            },
        }
    }

    fn sample_range(&mut self, r: [f64; 2]) -> f64 {
        if r[0] == r[1] {
            r[0]
        } else {
            self.rng.random_range(r[0]..r[1])
        }
    }

    /// Reference-state initialization: set the state to `frame` plus
    /// bounded uniform noise on joint angles and rates, feet lifted to the
    /// ground if slightly below it.
    pub fn reset_to_frame(&mut self, frame: &MotionFrame, noise: f64) -> Result<&SimState, SimError> {
        frame.validate(&self.model.tree)?;
        self.episode = self.sample_episode();
        self.model.mass[0] = self.nominal_root_mass + self.episode.base_mass_delta;

        let nq = self.model.tree.nq();
        let rd = self.model.root_dofs();
        let mut joint_q = frame.joint_q.clone();
        let mut v = DVector::zeros(self.model.nv());
        if rd == 6 {
            let rt = frame.root_quat.inverse();
            let w = rt * frame.root_ang_vel;
            let l = rt * frame.root_lin_vel;
            for k in 0..3 {
                v[k] = w[k];
                v[3 + k] = l[k];
            }
        }
        for d in 0..nq {
            joint_q[d] += self.sample_range([-noise, noise]);
            v[rd + d] = frame.joint_qd[d] + self.sample_range([-noise, noise]);
        }
        self.model.tree.clamp_to_limits(&mut joint_q);

        // Feet at or above ground.
        let mut probe = frame.clone();
        probe.joint_q = joint_q.clone();
        let fk = forward_kinematics(&self.model.tree, &probe)?;
        let min_z = self
            .model
            .contact_bodies
            .iter()
            .map(|&k| fk.key_body_pos[k].z)
            .fold(f64::INFINITY, f64::min);
        let mut root_pos = frame.root_pos;
        const RESET_GROUND_TOL: f64 = 0.03;
        if min_z < -RESET_GROUND_TOL {
            return Err(SimError::FrameBelowGround { depth: -min_z, tol: RESET_GROUND_TOL });
        }
        if min_z < 0.0 {
            root_pos.z -= min_z;
        }

        let n_contact = self.model.contact_bodies.len();
        self.state = SimState {
            root_pos,
            root_quat: frame.root_quat,
            joint_q,
            v,
            foot_contact: vec![false; n_contact],
            foot_air_time: vec![0.0; n_contact],
            foot_slip_speed: vec![0.0; n_contact],
            time_s: 0.0,
            step_count: 0,
        };
        self.refresh_contacts();
        self.last_action = self.state.joint_q.clone();
        self.active_pushes.clear();
        Ok(&self.state)
    }

    /// Schedule an external force on an end effector for a duration.
    pub fn apply_ee_push(
        &mut self,
        force_world: Vector3<f64>,
        key_body: usize,
        duration_s: f64,
    ) -> Result<(), SimError> {
        let is_ee = self.model.tree.end_effectors.contains(&key_body);
        if !is_ee {
            let name = self
                .model
                .tree
                .key_bodies
                .get(key_body)
                .map(|k| k.name.clone())
                .unwrap_or_else(|| format!("#{key_body}"));
            return Err(SimError::NotEndEffector(name));
        }
        self.active_pushes.push(ActivePush {
            key_body,
            force_world,
            until_s: self.state.time_s + duration_s,
        });
        Ok(())
    }

    /// Run one 50 Hz control step: exactly [`SUBSTEPS_PER_STEP`] PD+physics
    /// substeps with `action` held as the joint position target.
    pub fn step(&mut self, action: &DVector<f64>) -> Result<StepOutput, SimError> {
        let nq = self.model.tree.nq();
        if action.len() != nq {
            return Err(SimError::ActionDimension { expected: nq, got: action.len() });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged { time: self.state.time_s, what: "non-finite action".into() });
        }

        self.maybe_trigger_pushes();

        let mut touchdowns = Vec::new();
        let dt = 1.0 / INNER_HZ;
        for _ in 0..SUBSTEPS_PER_STEP {
            self.substep(action, dt, &mut touchdowns)?;
        }
        self.state.step_count += 1;
        self.last_action = action.clone();

        let terminated = self.check_termination();
        Ok(StepOutput { proprio: self.proprio(), terminated, touchdowns })
    }

    fn maybe_trigger_pushes(&mut self) {
        let t = self.state.time_s;
        if t >= self.episode.next_base_push_s {
            let dvx = self.sample_range(self.rand_cfg.push_base_vel);
            let dvy = self.sample_range(self.rand_cfg.push_base_vel);
            // Velocity delta is world-frame horizontal; convert to body.
            let dv_body = self.state.root_quat.inverse() * Vector3::new(dvx, dvy, 0.0);
            if self.model.root_dofs() == 6 {
                for k in 0..3 {
                    self.state.v[3 + k] += dv_body[k];
                }
            }
            self.episode.next_base_push_s = t + self.sample_range(self.rand_cfg.base_push_interval_s);
        }
        if t >= self.episode.next_ee_push_s {
            if !self.model.tree.end_effectors.is_empty() {
                let pick = self.rng.random_range(0..self.model.tree.end_effectors.len());
                let kb = self.model.tree.end_effectors[pick];
                let mag = self.sample_range(self.rand_cfg.push_ee_force_n);
                let dir = self.sample_unit_vector();
                let dur = self.rand_cfg.ee_push_duration_s;
                let _ = self.apply_ee_push(dir * mag, kb, dur);
            }
            self.episode.next_ee_push_s = t + self.sample_range(self.rand_cfg.ee_push_interval_s);
        }
    }

    fn sample_unit_vector(&mut self) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                self.sample_range([-1.0, 1.0]),
                self.sample_range([-1.0, 1.0]),
                self.sample_range([-1.0, 1.0]),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn substep(
        &mut self,
        action: &DVector<f64>,
        dt: f64,
        touchdowns: &mut Vec<(usize, f64)>,
    ) -> Result<(), SimError> {
        let nq = self.model.tree.nq();
        let rd = self.model.root_dofs();
        let links = compute_kinematics(
            &self.model,
            &self.state.root_pos,
            &self.state.root_quat,
            &self.state.joint_q,
            &self.state.v,
        );

        // PD torques on the actuated joints.
        let mut tau = DVector::zeros(self.model.nv());
        for d in 0..nq {
            let raw = self.model.kp[d] * (action[d] - self.state.joint_q[d])
                - self.model.kd[d] * self.state.v[rd + d];
            tau[rd + d] = (raw * self.episode.motor_scale)
                .clamp(-self.model.torque_limit[d], self.model.torque_limit[d]);
        }

        // External wrenches: ground contact plus active pushes.
        let mut f_ext = vec![Wrench::default(); self.model.tree.num_links()];
        self.accumulate_contact_forces(&links, &mut f_ext);
        let t_now = self.state.time_s;
        self.active_pushes.retain(|p| p.until_s > t_now);
        for push in &self.active_pushes {
            let kb = &self.model.tree.key_bodies[push.key_body];
            let kin = &links[kb.link];
            let point = kin.pos_world + kin.rot_world * kb.offset;
            f_ext[kb.link].add(&Wrench::from_world_force(kin, &push.force_world, &point));
        }

        let bias = bias_forces(&self.model, &links, &self.state.v, &f_ext, self.episode.gravity);
        let m = mass_matrix(&self.model, &links);
        let rhs = tau - bias;
        let Some(chol) = m.cholesky() else {
            return Err(SimError::Diverged { time: t_now, what: "singular mass matrix".into() });
        };
        let qacc = chol.solve(&rhs);

        // Semi-implicit Euler: velocities first, then positions with the
        // new velocities.
        self.state.v += qacc * dt;
        if rd == 6 {
            let w_body = Vector3::new(self.state.v[0], self.state.v[1], self.state.v[2]);
            let v_body = Vector3::new(self.state.v[3], self.state.v[4], self.state.v[5]);
            self.state.root_pos += self.state.root_quat * v_body * dt;
            // Body-frame angular velocity composes on the right.
            self.state.root_quat = UnitQuaternion::from_quaternion(
                (self.state.root_quat * quat_from_rotvec(&(w_body * dt))).into_inner().normalize(),
            );
        }
        for d in 0..nq {
            self.state.joint_q[d] += self.state.v[rd + d] * dt;
        }
        self.state.time_s += dt;

        if self.state.joint_q.iter().any(|v| !v.is_finite())
            || self.state.v.iter().any(|v| !v.is_finite())
        {
            return Err(SimError::Diverged { time: self.state.time_s, what: "NaN state".into() });
        }

        self.update_contact_book_keeping(dt, touchdowns);
        Ok(())
    }

    /// Spring-damper normal + capped Coulomb friction at each contact body.
    fn accumulate_contact_forces(&self, links: &[LinkKin], f_ext: &mut [Wrench]) {
        let c = &self.model.contact;
        for &k in &self.model.contact_bodies {
            let kb = &self.model.tree.key_bodies[k];
            let kin = &links[kb.link];
            let point = kin.pos_world + kin.rot_world * kb.offset;
            if point.z >= 0.0 {
                continue;
            }
            let vel = kin.point_velocity_world(&point);
            let fn_spring = -c.stiffness * point.z - c.damping * vel.z;
            let f_n = fn_spring.max(0.0);
            let v_t = Vector3::new(vel.x, vel.y, 0.0);
            let speed = v_t.norm();
            let f_t = if speed > 1e-9 {
                let mag = (c.tangential_scale * speed).min(self.episode.friction * f_n);
                -v_t / speed * mag
            } else {
                Vector3::zeros()
            };
            let force = Vector3::new(f_t.x, f_t.y, f_n);
            f_ext[kb.link].add(&Wrench::from_world_force(kin, &force, &point));
        }
    }

    fn refresh_contacts(&mut self) {
        let links = compute_kinematics(
            &self.model,
            &self.state.root_pos,
            &self.state.root_quat,
            &self.state.joint_q,
            &self.state.v,
        );
        for (i, &k) in self.model.contact_bodies.iter().enumerate() {
            let kb = &self.model.tree.key_bodies[k];
            let kin = &links[kb.link];
            let point = kin.pos_world + kin.rot_world * kb.offset;
            self.state.foot_contact[i] = point.z <= self.model.contact.ground_tolerance;
        }
    }

    fn update_contact_book_keeping(&mut self, dt: f64, touchdowns: &mut Vec<(usize, f64)>) {
        let links = compute_kinematics(
            &self.model,
            &self.state.root_pos,
            &self.state.root_quat,
            &self.state.joint_q,
            &self.state.v,
        );
        for (i, &k) in self.model.contact_bodies.iter().enumerate() {
            let kb = &self.model.tree.key_bodies[k];
            let kin = &links[kb.link];
            let point = kin.pos_world + kin.rot_world * kb.offset;
            let in_contact = point.z <= self.model.contact.ground_tolerance;
            let was = self.state.foot_contact[i];
            if in_contact {
                if !was {
                    touchdowns.push((i, self.state.foot_air_time[i]));
                }
                let vel = kin.point_velocity_world(&point);
                self.state.foot_slip_speed[i] = Vector3::new(vel.x, vel.y, 0.0).norm();
                self.state.foot_air_time[i] = 0.0;
            } else {
                self.state.foot_air_time[i] += dt;
                self.state.foot_slip_speed[i] = 0.0;
            }
            self.state.foot_contact[i] = in_contact;
        }
    }

    fn check_termination(&self) -> Option<Termination> {
        if self.model.fixed_base {
            return None;
        }
        let t = &self.model.termination;
        if self.state.root_pos.z < t.min_root_height {
            return Some(Termination::RootTooLow);
        }
        let up = self.state.root_quat * Vector3::z();
        if up.z < t.max_tilt.cos() {
            return Some(Termination::TiltedOver);
        }
        None
    }

    /// Proprioception: root height, gravity direction in the root frame,
    /// heading-local root velocities, joint positions/velocities and the
    /// last action.
    pub fn proprio(&self) -> DVector<f64> {
        let nq = self.model.tree.nq();
        let rd = self.model.root_dofs();
        let mut out = DVector::zeros(Self::proprio_dim(nq));
        let mut k = 0;
        out[k] = self.state.root_pos.z;
        k += 1;
        let g_body = self.state.root_quat.inverse() * Vector3::new(0.0, 0.0, -1.0);
        for i in 0..3 {
            out[k] = g_body[i];
            k += 1;
        }
        let frame = self.state.to_frame(rd);
        let heading_inv = heading_quat(&frame.root_quat).inverse();
        let lin = heading_inv * frame.root_lin_vel;
        let ang = heading_inv * frame.root_ang_vel;
        for i in 0..3 {
            out[k] = lin[i];
            k += 1;
        }
        for i in 0..3 {
            out[k] = ang[i];
            k += 1;
        }
        for d in 0..nq {
            out[k] = self.state.joint_q[d];
            k += 1;
        }
        for d in 0..nq {
            out[k] = self.state.v[rd + d];
            k += 1;
        }
        for d in 0..nq {
            out[k] = self.last_action[d];
            k += 1;
        }
        out
    }

    pub fn proprio_dim(nq: usize) -> usize {
        10 + 3 * nq
    }

    /// Total mechanical energy under the episode's gravity (diagnostic).
    pub fn mechanical_energy(&self) -> f64 {
        let links = compute_kinematics(
            &self.model,
            &self.state.root_pos,
            &self.state.root_quat,
            &self.state.joint_q,
            &self.state.v,
        );
        mechanical_energy(&self.model, &links, &self.state.v, self.episode.gravity)
    }
}
