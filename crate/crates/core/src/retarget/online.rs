//! Single-pass damped-least-squares retargeting for real-time use.

use std::time::Instant;

use nalgebra::{DVector, Vector3};

use crate::kinematics::{forward_kinematics, KinematicTree, MotionFrame};
use crate::math::angular_velocity_between;
use crate::motion::{ClipSource, HumanFrame, HumanMotion, MotionClip};

use super::objective::{frame_targets, tracking_residual};
use super::{RetargetConfig, RetargetError, RetargetMap};

/// Warm-start state carried between online steps.
#[derive(Clone, Debug)]
pub struct RetargetState {
    pub prev_frame: MotionFrame,
    pub warm: bool,
}

impl RetargetState {
    /// Cold state: joints at mid-range; the root is taken from the first
    /// human frame at the first step.
    pub fn cold(tree: &KinematicTree) -> Self {
        let mut f = MotionFrame::zeros(tree.nq());
        f.joint_q = tree.mid_range_q();
        Self { prev_frame: f, warm: false }
    }
}

/// One stream of online retargeting: owns the resolved map and warm state.
pub struct OnlineRetargeter<'a> {
    tree: &'a KinematicTree,
    cfg: RetargetConfig,
    map: RetargetMap,
    state: RetargetState,
}

impl<'a> OnlineRetargeter<'a> {
    pub fn new(
        tree: &'a KinematicTree,
        human: &HumanMotion,
        cfg: RetargetConfig,
    ) -> Result<Self, RetargetError> {
        let map = RetargetMap::resolve(tree, human, &cfg)?;
        Ok(Self { tree, cfg, map, state: RetargetState::cold(tree) })
    }

    pub fn map(&self) -> &RetargetMap {
        &self.map
    }

    pub fn state(&self) -> &RetargetState {
        &self.state
    }

    /// One damped-least-squares step on the stacked position+orientation
    /// residual: `Δq = Jᵀ(JJᵀ + λI)⁻¹ r`, clamped per-DOF to the step limit
    /// and to joint limits. `dt` is the time since the previous step, used
    /// for the backward-difference velocities.
    pub fn step(&mut self, hf: &HumanFrame, dt: f64) -> Result<MotionFrame, RetargetError> {
        let finite = hf.pos.iter().all(|p| p.iter().all(|v| v.is_finite()))
            && hf.quat.iter().all(|q| q.coords.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(RetargetError::NanInput);
        }
        let targets = frame_targets(&self.map, hf);

        let mut frame = self.state.prev_frame.clone();
        frame.root_pos = targets.root_pos;
        frame.root_quat = targets.root_quat;

        let fk = forward_kinematics(self.tree, &frame)?;
        let (r, jac) = tracking_residual(self.tree, &self.cfg, &self.map, &targets, &fk);

        // JJᵀ + λI is symmetric positive definite for λ > 0, so Cholesky
        // always succeeds and the singular fallback is unreachable.
        let m = jac.nrows();
        let a = &jac * jac.transpose() + nalgebra::DMatrix::identity(m, m) * self.cfg.dls_damping;
        let x = a
            .cholesky()
            .map(|ch| ch.solve(&r))
            .unwrap_or_else(|| DVector::zeros(m));
        let mut dq = jac.transpose() * x;
        for v in dq.iter_mut() {
            *v = v.clamp(-self.cfg.step_limit, self.cfg.step_limit);
        }
        frame.joint_q += dq;
        self.tree.clamp_to_limits(&mut frame.joint_q);

        if self.state.warm && dt > 0.0 {
            let prev = &self.state.prev_frame;
            frame.root_lin_vel = (frame.root_pos - prev.root_pos) / dt;
            frame.root_ang_vel = angular_velocity_between(&prev.root_quat, &frame.root_quat, dt);
            frame.joint_qd = (&frame.joint_q - &prev.joint_q) / dt;
        } else {
            frame.root_lin_vel = Vector3::zeros();
            frame.root_ang_vel = Vector3::zeros();
            frame.joint_qd = DVector::zeros(frame.joint_q.len());
        }

        self.state = RetargetState { prev_frame: frame.clone(), warm: true };
        Ok(frame)
    }

    /// Weighted tracking residual norm at the current state for a target
    /// frame; diagnostic for contraction checks.
    pub fn residual_norm(&self, hf: &HumanFrame) -> Result<f64, RetargetError> {
        let targets = frame_targets(&self.map, hf);
        let mut frame = self.state.prev_frame.clone();
        frame.root_pos = targets.root_pos;
        frame.root_quat = targets.root_quat;
        let fk = forward_kinematics(self.tree, &frame)?;
        let (r, _) = tracking_residual(self.tree, &self.cfg, &self.map, &targets, &fk);
        Ok(r.norm())
    }
}

/// Retarget a whole human motion sequentially with warm starts, as the
/// online CLI mode does. Returns the clip plus per-frame wall time (s).
pub fn retarget_online_clip(
    human: &HumanMotion,
    tree: &KinematicTree,
    cfg: &RetargetConfig,
) -> Result<(MotionClip, Vec<f64>), RetargetError> {
    let mut rt = OnlineRetargeter::new(tree, human, cfg.clone())?;
    let dt = 1.0 / human.fps;
    let mut frames = Vec::with_capacity(human.frames.len());
    let mut times = Vec::with_capacity(human.frames.len());
    for hf in &human.frames {
        let t0 = Instant::now();
        frames.push(rt.step(hf, dt)?);
        times.push(t0.elapsed().as_secs_f64());
    }
    let mut clip = MotionClip {
        name: human.name.clone(),
        fps: human.fps,
        tree_id: tree.name.clone(),
        source: ClipSource::OnlineRetarget,
        frames,
    };
    clip.recompute_velocities();
    Ok((clip, times))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::synthetic::{human_from_clip, ik_test_clip, LimbScales};

    #[test]
    fn zero_residual_means_zero_step() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 5, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let mut rt = OnlineRetargeter::new(&tree, &human, RetargetConfig::default()).unwrap();
        // Put the state exactly at the source pose.
        rt.state = RetargetState { prev_frame: clip.frames[0].clone(), warm: true };
        let out = rt.step(&human.frames[0], 0.02).unwrap();
        assert_eq!(out.joint_q, clip.frames[0].joint_q);
    }

    #[test]
    fn converges_from_small_perturbation() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 6, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let mut rt = OnlineRetargeter::new(&tree, &human, RetargetConfig::default()).unwrap();
        let mut start = clip.frames[0].clone();
        for d in 0..tree.nq() {
            start.joint_q[d] += 0.05 * ((d as f64) * 1.3).sin();
        }
        rt.state = RetargetState { prev_frame: start, warm: true };
        let mut err = f64::INFINITY;
        for _ in 0..10 {
            let out = rt.step(&human.frames[0], 0.02).unwrap();
            err = (&out.joint_q - &clip.frames[0].joint_q).norm()
                / (tree.nq() as f64).sqrt();
        }
        assert!(err <= 1e-3, "rms error after 10 calls: {err}");
    }

    #[test]
    fn nan_input_rejected() {
        let tree = KinematicTree::reference_humanoid();
        let clip = ik_test_clip(&tree, 7, 50.0, 0.5);
        let human = human_from_clip(&clip, &tree, &LimbScales::identity(&tree));
        let mut rt = OnlineRetargeter::new(&tree, &human, RetargetConfig::default()).unwrap();
        let mut hf = human.frames[0].clone();
        hf.pos[3].x = f64::NAN;
        assert!(matches!(rt.step(&hf, 0.02), Err(RetargetError::NanInput)));
    }
}
