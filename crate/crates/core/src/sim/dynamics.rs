//! Articulated rigid-body dynamics on the kinematic tree: recursive
//! Newton-Euler for bias forces and the composite-rigid-body algorithm for
//! the joint-space mass matrix. Spatial vectors are (angular, linear) pairs
//! in link coordinates; the floating root is a 6-DOF joint whose velocity
//! is the body-frame root twist.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::kinematics::JointKind;

use super::model::SimModel;

/// Per-link kinematic state for one dynamics evaluation.
#[derive(Clone, Debug)]
pub(crate) struct LinkKin {
    pub rot_world: Rotation3<f64>,
    pub pos_world: Vector3<f64>,
    /// Rotation body→parent.
    rot_to_parent: Rotation3<f64>,
    /// Body origin in parent coordinates.
    t_in_parent: Vector3<f64>,
    /// Body-frame twist (ω, v at origin).
    pub twist_ang: Vector3<f64>,
    pub twist_lin: Vector3<f64>,
}

impl LinkKin {
    /// World-frame velocity of a point rigidly attached to this link.
    pub fn point_velocity_world(&self, point_world: &Vector3<f64>) -> Vector3<f64> {
        let w_world = self.rot_world * self.twist_ang;
        let v_world = self.rot_world * self.twist_lin;
        v_world + w_world.cross(&(point_world - self.pos_world))
    }
}

/// Body-frame external wrench (torque about link origin, force).
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Wrench {
    pub ang: Vector3<f64>,
    pub lin: Vector3<f64>,
}

impl Wrench {
    /// Convert a world force applied at a world point into a body wrench.
    pub fn from_world_force(
        kin: &LinkKin,
        force_world: &Vector3<f64>,
        point_world: &Vector3<f64>,
    ) -> Self {
        let rt = kin.rot_world.inverse();
        let lin = rt * force_world;
        let ang = rt * (point_world - kin.pos_world).cross(force_world);
        Self { ang, lin }
    }

    pub fn add(&mut self, other: &Wrench) {
        self.ang += other.ang;
        self.lin += other.lin;
    }
}

/// Forward pass: world poses and body-frame twists for every link.
/// `v` is the generalized velocity (root twist then joint rates; joint
/// rates only when the base is fixed).
pub(crate) fn compute_kinematics(
    model: &SimModel,
    root_pos: &Vector3<f64>,
    root_quat: &UnitQuaternion<f64>,
    joint_q: &DVector<f64>,
    v: &DVector<f64>,
) -> Vec<LinkKin> {
    let tree = &model.tree;
    let rd = model.root_dofs();
    let mut links: Vec<LinkKin> = Vec::with_capacity(tree.num_links());
    for (i, joint) in tree.joints.iter().enumerate() {
        let kin = match joint.kind {
            JointKind::FreeRoot => {
                let rot = root_quat.to_rotation_matrix();
                let (tw_a, tw_l) = if model.fixed_base {
                    (Vector3::zeros(), Vector3::zeros())
                } else {
                    (
                        Vector3::new(v[0], v[1], v[2]),
                        Vector3::new(v[3], v[4], v[5]),
                    )
                };
                LinkKin {
                    rot_world: rot,
                    pos_world: joint.offset + root_pos,
                    rot_to_parent: rot,
                    t_in_parent: joint.offset + root_pos,
                    twist_ang: tw_a,
                    twist_lin: tw_l,
                }
            }
            JointKind::Revolute => {
                let p = joint.parent.expect("revolute joints have parents");
                let parent = &links[p];
                let dof = tree.dof_of_joint(i).expect("revolute has dof");
                let q = joint_q[dof];
                let qd = v[rd + dof];
                let q_loc = Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(joint.axis), q);
                let rot_world = parent.rot_world * q_loc;
                let pos_world = parent.pos_world + parent.rot_world * joint.offset;
                // Parent→child motion transform, then the joint rate term.
                let qt = q_loc.inverse();
                let twist_ang = qt * parent.twist_ang + joint.axis * qd;
                let twist_lin = qt * (parent.twist_lin + parent.twist_ang.cross(&joint.offset));
                LinkKin {
                    rot_world,
                    pos_world,
                    rot_to_parent: q_loc,
                    t_in_parent: joint.offset,
                    twist_ang,
                    twist_lin,
                }
            }
        };
        links.push(kin);
    }
    links
}

fn apply_inertia(
    mass: f64,
    com: &Vector3<f64>,
    i_com: &Matrix3<f64>,
    ang: &Vector3<f64>,
    lin: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let h_lin = mass * (lin + ang.cross(com));
    let h_ang = i_com * ang + com.cross(&h_lin);
    (h_ang, h_lin)
}

/// Generalized bias forces (Coriolis + gravity − external wrenches): the
/// torques required for zero generalized acceleration.
pub(crate) fn bias_forces(
    model: &SimModel,
    links: &[LinkKin],
    v: &DVector<f64>,
    f_ext: &[Wrench],
    gravity: f64,
) -> DVector<f64> {
    let tree = &model.tree;
    let n = tree.num_links();
    let rd = model.root_dofs();
    let mut bias = DVector::zeros(model.nv());

    // Forward: body-frame bias accelerations with q̈ = 0. The base gets a
    // fictitious upward acceleration so gravity appears in every body.
    let mut acc: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(n);
    for (i, joint) in tree.joints.iter().enumerate() {
        let a = match joint.parent {
            None => {
                let rt = links[i].rot_world.inverse();
                (Vector3::zeros(), rt * Vector3::new(0.0, 0.0, gravity))
            }
            Some(p) => {
                let kin = &links[i];
                let qt = kin.rot_to_parent.inverse();
                let (pa, pl) = acc[p];
                let a_ang = qt * pa;
                let a_lin = qt * (pl + pa.cross(&kin.t_in_parent));
                // Velocity-product term v ×m (S q̇): S q̇ is the twist part
                // added at this joint, i.e. (axis·q̇, 0) in body coords.
                let dof = tree.dof_of_joint(i).expect("revolute");
                let sqd = joint.axis * v[rd + dof];
                let c_ang = kin.twist_ang.cross(&sqd);
                let c_lin = kin.twist_lin.cross(&sqd);
                (a_ang + c_ang, a_lin + c_lin)
            }
        };
        acc.push(a);
    }

    // Net force per body, minus externals.
    let mut f: Vec<Wrench> = Vec::with_capacity(n);
    for i in 0..n {
        let (ia_ang, ia_lin) =
            apply_inertia(model.mass[i], &model.com[i], &model.i_com[i], &acc[i].0, &acc[i].1);
        let (h_ang, h_lin) = apply_inertia(
            model.mass[i],
            &model.com[i],
            &model.i_com[i],
            &links[i].twist_ang,
            &links[i].twist_lin,
        );
        // v ×* h
        let vxh_ang = links[i].twist_ang.cross(&h_ang) + links[i].twist_lin.cross(&h_lin);
        let vxh_lin = links[i].twist_ang.cross(&h_lin);
        f.push(Wrench {
            ang: ia_ang + vxh_ang - f_ext[i].ang,
            lin: ia_lin + vxh_lin - f_ext[i].lin,
        });
    }

    // Backward: project onto joint subspaces, accumulate into parents.
    for i in (0..n).rev() {
        let joint = &tree.joints[i];
        match joint.kind {
            JointKind::FreeRoot => {
                if !model.fixed_base {
                    for k in 0..3 {
                        bias[k] = f[i].ang[k];
                        bias[3 + k] = f[i].lin[k];
                    }
                }
            }
            JointKind::Revolute => {
                let dof = tree.dof_of_joint(i).expect("revolute");
                bias[rd + dof] = joint.axis.dot(&f[i].ang);
                let p = joint.parent.expect("revolute has parent");
                let q = links[i].rot_to_parent;
                let lin_p = q * f[i].lin;
                let ang_p = q * f[i].ang + links[i].t_in_parent.cross(&lin_p);
                f[p].ang += ang_p;
                f[p].lin += lin_p;
            }
        }
    }
    bias
}

/// Composite spatial inertia expressed as (mass, com, inertia about com).
#[derive(Clone, Copy, Debug)]
struct CompositeInertia {
    mass: f64,
    com: Vector3<f64>,
    i_com: Matrix3<f64>,
}

fn parallel_axis(mass: f64, d: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() * (mass * d.norm_squared()) - d * d.transpose() * mass
}

impl CompositeInertia {
    fn merge(&self, other: &CompositeInertia) -> CompositeInertia {
        let mass = self.mass + other.mass;
        if mass <= 0.0 {
            return CompositeInertia { mass: 0.0, com: Vector3::zeros(), i_com: Matrix3::zeros() };
        }
        let com = (self.com * self.mass + other.com * other.mass) / mass;
        let i_com = self.i_com
            + parallel_axis(self.mass, &(self.com - com))
            + other.i_com
            + parallel_axis(other.mass, &(other.com - com));
        CompositeInertia { mass, com, i_com }
    }

    /// Re-express in the parent frame (rotate by Q, shift by t).
    fn to_parent(&self, q: &Rotation3<f64>, t: &Vector3<f64>) -> CompositeInertia {
        CompositeInertia {
            mass: self.mass,
            com: q * self.com + t,
            i_com: q.matrix() * self.i_com * q.matrix().transpose(),
        }
    }
}

/// Joint-space mass matrix via CRBA.
pub(crate) fn mass_matrix(model: &SimModel, links: &[LinkKin]) -> DMatrix<f64> {
    let tree = &model.tree;
    let n = tree.num_links();
    let rd = model.root_dofs();
    let nv = model.nv();

    let mut comp: Vec<CompositeInertia> = (0..n)
        .map(|i| CompositeInertia { mass: model.mass[i], com: model.com[i], i_com: model.i_com[i] })
        .collect();
    for i in (1..n).rev() {
        let p = tree.joints[i].parent.expect("non-root has parent");
        let child = comp[i].to_parent(&links[i].rot_to_parent, &links[i].t_in_parent);
        comp[p] = comp[p].merge(&child);
    }

    // Motion subspace columns per joint, in the joint's own coordinates.
    let joint_cols = |i: usize| -> Vec<(usize, Vector3<f64>, Vector3<f64>)> {
        match tree.joints[i].kind {
            JointKind::FreeRoot => {
                if model.fixed_base {
                    Vec::new()
                } else {
                    (0..6)
                        .map(|k| {
                            let mut ang = Vector3::zeros();
                            let mut lin = Vector3::zeros();
                            if k < 3 {
                                ang[k] = 1.0;
                            } else {
                                lin[k - 3] = 1.0;
                            }
                            (k, ang, lin)
                        })
                        .collect()
                }
            }
            JointKind::Revolute => {
                let dof = tree.dof_of_joint(i).expect("revolute");
                vec![(rd + dof, tree.joints[i].axis, Vector3::zeros())]
            }
        }
    };

    let mut m = DMatrix::zeros(nv, nv);
    for i in 0..n {
        for (col, s_ang, s_lin) in joint_cols(i) {
            let (mut f_ang, mut f_lin) =
                apply_inertia(comp[i].mass, &comp[i].com, &comp[i].i_com, &s_ang, &s_lin);
            // Own joint's columns.
            for (col2, s2_ang, s2_lin) in joint_cols(i) {
                let val = s2_ang.dot(&f_ang) + s2_lin.dot(&f_lin);
                m[(col, col2)] = val;
            }
            // Walk ancestors, transforming the force as we go.
            let mut j = i;
            while let Some(p) = tree.joints[j].parent {
                let q = links[j].rot_to_parent;
                let lin_p = q * f_lin;
                let ang_p = q * f_ang + links[j].t_in_parent.cross(&lin_p);
                f_ang = ang_p;
                f_lin = lin_p;
                j = p;
                for (col2, s2_ang, s2_lin) in joint_cols(j) {
                    let val = s2_ang.dot(&f_ang) + s2_lin.dot(&f_lin);
                    m[(col, col2)] = val;
                    m[(col2, col)] = val;
                }
            }
        }
    }
    m
}

/// Kinetic + gravitational potential energy of the current state.
pub(crate) fn mechanical_energy(
    model: &SimModel,
    links: &[LinkKin],
    v: &DVector<f64>,
    gravity: f64,
) -> f64 {
    let m = mass_matrix(model, links);
    let kinetic = 0.5 * v.dot(&(&m * v));
    let mut potential = 0.0;
    for (i, kin) in links.iter().enumerate() {
        let com_world = kin.pos_world + kin.rot_world * model.com[i];
        potential += model.mass[i] * gravity * com_world.z;
    }
    kinetic + potential
}
