use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root translation (3) plus root axis-angle rotation (3).
pub const ROOT_DOFS: usize = 6;

/// Pose dimension of the shipped 16-joint topology.
pub const DEFAULT_POSE_DIM: usize = 43;

/// Which phase of the hierarchical detection fit a joint belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum JointGroup {
    #[default]
    Torso,
    Limb,
}

/// One revolute degree of freedom, axis given in the joint's local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Dof {
    pub axis: Vector3<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Unit direction of the offset from the parent joint, in the parent frame
    /// at rest. For the root it is the offset from the model origin.
    pub direction: Vector3<f64>,
    pub dofs: Vec<Dof>,
    pub group: JointGroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
    bone_lengths: Vec<f64>,
    dof_offsets: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl Skeleton {
    /// Joints must be listed parents-first with joint 0 as the only root.
    pub fn new(joints: Vec<Joint>, bone_lengths: Vec<f64>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("skeleton has no joints"));
        }
        if bone_lengths.len() != joints.len() {
            return Err(Error::invalid(format!(
                "{} bone lengths for {} joints",
                bone_lengths.len(),
                joints.len()
            )));
        }
        let mut children = vec![Vec::new(); joints.len()];
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::invalid("joint 0 must be the root")),
                (_, None) => return Err(Error::invalid(format!("joint '{}' has no parent", j.name))),
                (_, Some(p)) if p >= i => {
                    return Err(Error::invalid(format!(
                        "joint '{}' lists parent {p} which does not precede it",
                        j.name
                    )))
                }
                (_, Some(p)) => children[p].push(i),
            }
            let norm = j.direction.norm();
            if !(norm - 1.0).abs().lt(&1e-9) {
                return Err(Error::invalid(format!("joint '{}' direction is not unit length", j.name)));
            }
            for d in &j.dofs {
                if !(d.min <= d.max) {
                    return Err(Error::invalid(format!("joint '{}' has limit min > max", j.name)));
                }
                if (d.axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("joint '{}' has a non-unit DOF axis", j.name)));
                }
            }
        }
        if let Some(b) = bone_lengths.iter().find(|b| !(**b >= 0.0)) {
            return Err(Error::invalid(format!("negative bone length {b}")));
        }
        let mut dof_offsets = Vec::with_capacity(joints.len());
        let mut next = ROOT_DOFS;
        for j in &joints {
            dof_offsets.push(next);
            next += j.dofs.len();
        }
        Ok(Self {
            joints,
            bone_lengths,
            dof_offsets,
            children,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn bone_lengths(&self) -> &[f64] {
        &self.bone_lengths
    }

    pub fn children(&self, joint: usize) -> &[usize] {
        &self.children[joint]
    }

    /// Same topology with different bone lengths.
    pub fn with_bone_lengths(&self, bone_lengths: Vec<f64>) -> Result<Self> {
        if bone_lengths.len() != self.joints.len() {
            return Err(Error::invalid("bone length count mismatch"));
        }
        if let Some(b) = bone_lengths.iter().find(|b| !(**b >= 0.0)) {
            return Err(Error::invalid(format!("negative bone length {b}")));
        }
        Ok(Self {
            bone_lengths,
            ..self.clone()
        })
    }

    pub fn pose_dim(&self) -> usize {
        ROOT_DOFS + self.joints.iter().map(|j| j.dofs.len()).sum::<usize>()
    }

    /// Index of the first pose parameter belonging to `joint`.
    pub fn dof_offset(&self, joint: usize) -> usize {
        self.dof_offsets[joint]
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Lower and upper limit per pose parameter; root entries are unbounded.
    pub fn limits(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::NEG_INFINITY, f64::INFINITY); ROOT_DOFS];
        for j in &self.joints {
            out.extend(j.dofs.iter().map(|d| (d.min, d.max)));
        }
        out
    }

    /// Pose parameter indices driven by joints of `group` (root excluded).
    pub fn group_params(&self, group: JointGroup) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, j) in self.joints.iter().enumerate() {
            if j.group == group {
                out.extend(self.dof_offsets[i]..self.dof_offsets[i] + j.dofs.len());
            }
        }
        out
    }

    /// Joints whose parent chain stays inside `group`, root included.
    pub fn group_joints(&self, group: JointGroup) -> Vec<usize> {
        (0..self.joints.len()).filter(|&i| self.joints[i].group == group).collect()
    }

    /// True when `ancestor` is `joint` or lies on its parent chain.
    pub fn is_ancestor(&self, ancestor: usize, joint: usize) -> bool {
        let mut j = Some(joint);
        while let Some(i) = j {
            if i == ancestor {
                return true;
            }
            j = self.joints[i].parent;
        }
        false
    }

    /// Rest-pose joint positions (all joint rotations zero, root at origin).
    pub fn rest_positions(&self) -> Vec<Vector3<f64>> {
        let mut out: Vec<Vector3<f64>> = Vec::with_capacity(self.joints.len());
        for (i, j) in self.joints.iter().enumerate() {
            let base = j.parent.map(|p| out[p]).unwrap_or_else(Vector3::zeros);
            out.push(base + j.direction * self.bone_lengths[i]);
        }
        out
    }
}

/// Twist pose parameters for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseVector(pub Vec<f64>);

impl PoseVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotation(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for PoseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(name: &str, parent: Option<usize>) -> Joint {
        Joint {
            name: name.into(),
            parent,
            direction: Vector3::x(),
            dofs: vec![],
            group: JointGroup::Torso,
        }
    }

    #[test]
    fn rejects_forward_parent_reference() {
        let j = vec![joint("a", None), joint("b", Some(2)), joint("c", Some(1))];
        assert!(Skeleton::new(j, vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_negative_length_and_bad_limits() {
        let j = vec![joint("a", None), joint("b", Some(0))];
        assert!(Skeleton::new(j.clone(), vec![0.0, -1.0]).is_err());
        let mut j2 = j;
        j2[1].dofs.push(Dof {
            axis: Vector3::z(),
            min: 1.0,
            max: -1.0,
        });
        assert!(Skeleton::new(j2, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn rest_positions_accumulate_offsets() {
        let j = vec![joint("a", None), joint("b", Some(0)), joint("c", Some(1))];
        let s = Skeleton::new(j, vec![0.5, 1.0, 2.0]).unwrap();
        let p = s.rest_positions();
        assert_eq!(p[2], Vector3::new(3.5, 0.0, 0.0));
        assert!(s.is_ancestor(0, 2));
        assert!(!s.is_ancestor(2, 1));
    }
}
