//! Articulated skeleton with rigidly attached isotropic Gaussians.
//!
//! Pose vectors hold 6 root parameters (translation, axis-angle rotation)
//! followed by one revolute angle per joint DOF, in joint order. The
//! shipped default topology has 16 joints and 37 joint DOFs, 43 in total.

mod kinematics;
mod model;
mod skeleton;

pub use kinematics::{forward_kinematics, right_jacobian, skew, Kinematics, PoseGradient, Rigid};
pub use model::{default_actor, pose_gaussians, pose_jacobian, ActorModel, GaussianBlob, JointGaussian, PosedGaussians};
pub use skeleton::{Dof, Joint, JointGroup, PoseVector, Skeleton, DEFAULT_POSE_DIM, ROOT_DOFS};
