use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};

use super::skeleton::{PoseVector, Skeleton, ROOT_DOFS};
use crate::error::{Error, Result};

/// Rigid transform `x -> rot * x + trans`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl Rigid {
    pub fn identity() -> Self {
        Self {
            rot: Matrix3::identity(),
            trans: Vector3::zeros(),
        }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rot * x + self.trans
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rot: self.rot * other.rot,
            trans: self.rot * other.trans + self.trans,
        }
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Right Jacobian of SO(3): `Exp(w + d) ≈ Exp(w) Exp(J_r(w) d)`.
pub fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-10 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Matrix3::identity() - k * a + k2 * b
}

fn axis_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), angle).into_inner()
}

/// Forward kinematics state for one pose: world transforms of every joint
/// frame plus the world axes needed for derivatives.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub transforms: Vec<Rigid>,
    /// World rotation of each joint's parent frame (identity for the root).
    parent_rot: Vec<Matrix3<f64>>,
    /// World axis of every joint DOF, in pose-parameter order after the root.
    dof_axes: Vec<Vector3<f64>>,
    dof_joint: Vec<usize>,
    root_jr: Matrix3<f64>,
    pose_dim: usize,
}

/// Reverse-mode result: gradient w.r.t. pose parameters and bone lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseGradient {
    pub pose: Vec<f64>,
    pub bone_lengths: Vec<f64>,
}

impl Kinematics {
    pub fn new(skeleton: &Skeleton, pose: &PoseVector) -> Result<Self> {
        let dim = skeleton.pose_dim();
        if pose.len() != dim {
            return Err(Error::invalid(format!(
                "pose has {} parameters, skeleton expects {dim}",
                pose.len()
            )));
        }
        if let Some(i) = pose.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("pose parameter {i} is not finite")));
        }
        let joints = skeleton.joints();
        let lengths = skeleton.bone_lengths();
        let mut transforms: Vec<Rigid> = Vec::with_capacity(joints.len());
        let mut parent_rot = Vec::with_capacity(joints.len());
        let mut dof_axes = Vec::with_capacity(dim - ROOT_DOFS);
        let mut dof_joint = Vec::with_capacity(dim - ROOT_DOFS);
        let omega = pose.rotation();
        let root_rot = Rotation3::new(omega).into_inner();

        for (i, joint) in joints.iter().enumerate() {
            let (base_rot, origin) = match joint.parent {
                None => (root_rot, pose.translation() + joint.direction * lengths[i]),
                Some(p) => {
                    let pt = &transforms[p];
                    (pt.rot, pt.apply(&(joint.direction * lengths[i])))
                }
            };
            parent_rot.push(match joint.parent {
                None => Matrix3::identity(),
                Some(p) => transforms[p].rot,
            });
            let mut rot = base_rot;
            let off = skeleton.dof_offset(i);
            for (k, dof) in joint.dofs.iter().enumerate() {
                dof_axes.push(rot * dof.axis);
                dof_joint.push(i);
                rot *= axis_rotation(&dof.axis, pose.0[off + k]);
            }
            transforms.push(Rigid { rot, trans: origin });
        }
        Ok(Self {
            transforms,
            parent_rot,
            dof_axes,
            dof_joint,
            root_jr: right_jacobian(&omega),
            pose_dim: dim,
        })
    }

    pub fn joint_positions(&self) -> Vec<Vector3<f64>> {
        self.transforms.iter().map(|t| t.trans).collect()
    }

    /// Derivative of a world point rigidly attached to `joint` w.r.t. all
    /// pose parameters (3 × pose_dim).
    pub fn point_jacobian(&self, skeleton: &Skeleton, joint: usize, x: &Vector3<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.pose_dim);
        for r in 0..3 {
            jac[(r, r)] = 1.0;
        }
        let root = &self.transforms[0];
        let y = root.rot.transpose() * (x - root.trans);
        let d_omega = -root.rot * skew(&y) * self.root_jr;
        jac.view_mut((0, 3), (3, 3)).copy_from(&d_omega);
        for (k, axis) in self.dof_axes.iter().enumerate() {
            let a = self.dof_joint[k];
            if skeleton.is_ancestor(a, joint) {
                let col = axis.cross(&(x - self.transforms[a].trans));
                jac.view_mut((0, ROOT_DOFS + k), (3, 1)).copy_from(&col);
            }
        }
        jac
    }

    /// Derivative of a world point attached to `joint` w.r.t. every bone length.
    pub fn bone_length_jacobian(&self, skeleton: &Skeleton, joint: usize) -> DMatrix<f64> {
        let n = skeleton.num_joints();
        let mut jac = DMatrix::zeros(3, n);
        let mut j = Some(joint);
        while let Some(a) = j {
            let col = self.parent_rot[a] * skeleton.joints()[a].direction;
            jac.view_mut((0, a), (3, 1)).copy_from(&col);
            j = skeleton.joints()[a].parent;
        }
        jac
    }

    /// Vector-Jacobian product for a set of world points.
    ///
    /// `points` yields `(joint, world position, dE/dx)` for points rigidly
    /// attached to `joint`.
    pub fn backprop<I>(&self, skeleton: &Skeleton, points: I) -> PoseGradient
    where
        I: IntoIterator<Item = (usize, Vector3<f64>, Vector3<f64>)>,
    {
        let n = skeleton.num_joints();
        let mut force = vec![Vector3::zeros(); n];
        let mut moment = vec![Vector3::zeros(); n];
        for (j, x, g) in points {
            force[j] += g;
            moment[j] += x.cross(&g);
        }
        // subtree sums; parents precede children
        for j in (1..n).rev() {
            let p = skeleton.joints()[j].parent.expect("non-root joint has a parent");
            let (f, m) = (force[j], moment[j]);
            force[p] += f;
            moment[p] += m;
        }
        let mut pose = vec![0.0; self.pose_dim];
        let root = &self.transforms[0];
        pose[..3].copy_from_slice(force[0].as_slice());
        let torque = moment[0] - root.trans.cross(&force[0]);
        let d_omega = self.root_jr.transpose() * (root.rot.transpose() * torque);
        pose[3..6].copy_from_slice(d_omega.as_slice());
        for (k, axis) in self.dof_axes.iter().enumerate() {
            let a = self.dof_joint[k];
            let o = self.transforms[a].trans;
            pose[ROOT_DOFS + k] = axis.dot(&(moment[a] - o.cross(&force[a])));
        }
        let bone_lengths = (0..n)
            .map(|a| (self.parent_rot[a] * skeleton.joints()[a].direction).dot(&force[a]))
            .collect();
        PoseGradient { pose, bone_lengths }
    }
}

/// World transform of every joint frame.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &PoseVector) -> Result<Vec<Rigid>> {
    Ok(Kinematics::new(skeleton, pose)?.transforms)
}
