use nalgebra::{DMatrix, Vector3};

use super::kinematics::Kinematics;
use super::skeleton::{PoseVector, Skeleton};
use crate::error::{Error, Result};

/// One isotropic 3D density element attached to a bone.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBlob {
    /// Mean in the attached joint's frame (meters).
    pub mean_local: Vector3<f64>,
    pub std_dev: f64,
    pub density: f64,
    pub bone: usize,
    pub color: Option<[f64; 3]>,
}

/// Parameters of the per-joint Gaussians used by the detection term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointGaussian {
    pub std_dev: f64,
    pub density: f64,
}

impl Default for JointGaussian {
    fn default() -> Self {
        Self {
            std_dev: 0.08,
            density: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorModel {
    pub skeleton: Skeleton,
    pub gaussians: Vec<GaussianBlob>,
    pub joint_gaussian: JointGaussian,
}

impl ActorModel {
    pub fn new(skeleton: Skeleton, gaussians: Vec<GaussianBlob>, joint_gaussian: JointGaussian) -> Result<Self> {
        let model = Self {
            skeleton,
            gaussians,
            joint_gaussian,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.skeleton.num_joints();
        for (q, g) in self.gaussians.iter().enumerate() {
            if g.bone >= n {
                return Err(Error::invalid(format!("gaussian {q} references bone {} of {n}", g.bone)));
            }
            if !(g.std_dev > 0.0) {
                return Err(Error::invalid(format!("gaussian {q} has std_dev <= 0")));
            }
            if !(g.density >= 0.0) {
                return Err(Error::invalid(format!("gaussian {q} has negative density")));
            }
        }
        Ok(())
    }

    /// World positions of all skeleton joints for `pose`.
    pub fn joint_positions(&self, pose: &PoseVector) -> Result<Vec<Vector3<f64>>> {
        Ok(Kinematics::new(&self.skeleton, pose)?.joint_positions())
    }

    /// Joint Gaussians at every joint, posed.
    pub fn posed_joint_gaussians(&self, pose: &PoseVector) -> Result<PosedGaussians> {
        let joints = self.joint_positions(pose)?;
        let n = joints.len();
        Ok(PosedGaussians {
            means: joints,
            std_devs: vec![self.joint_gaussian.std_dev; n],
            densities: vec![self.joint_gaussian.density; n],
            bones: (0..n).collect(),
            jacobians: None,
        })
    }

    /// Rest-pose (T-pose at origin) world means.
    pub fn rest_means(&self) -> Vec<Vector3<f64>> {
        let rest = self.skeleton.rest_positions();
        self.gaussians.iter().map(|g| rest[g.bone] + g.mean_local).collect()
    }
}

/// World-frame realization of the Gaussian set for one pose.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PosedGaussians {
    pub means: Vec<Vector3<f64>>,
    pub std_devs: Vec<f64>,
    pub densities: Vec<f64>,
    pub bones: Vec<usize>,
    /// Optional 3 × pose_dim derivative of every world mean.
    pub jacobians: Option<Vec<DMatrix<f64>>>,
}

impl PosedGaussians {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Scene built directly from world-frame parameters (no skeleton).
    pub fn from_world(means: Vec<Vector3<f64>>, std_devs: Vec<f64>, densities: Vec<f64>) -> Self {
        let n = means.len();
        assert_eq!(std_devs.len(), n);
        assert_eq!(densities.len(), n);
        Self {
            means,
            std_devs,
            densities,
            bones: vec![0; n],
            jacobians: None,
        }
    }

    /// Concatenation of two scenes (e.g. body plus joint Gaussians).
    pub fn concat(&self, other: &PosedGaussians) -> PosedGaussians {
        let mut out = self.clone();
        out.means.extend_from_slice(&other.means);
        out.std_devs.extend_from_slice(&other.std_devs);
        out.densities.extend_from_slice(&other.densities);
        out.bones.extend_from_slice(&other.bones);
        out.jacobians = None;
        out
    }
}

pub fn pose_gaussians(model: &ActorModel, pose: &PoseVector) -> Result<PosedGaussians> {
    model.validate()?;
    let kin = Kinematics::new(&model.skeleton, pose)?;
    Ok(pose_with(&kin, model))
}

fn pose_with(kin: &Kinematics, model: &ActorModel) -> PosedGaussians {
    let g = &model.gaussians;
    PosedGaussians {
        means: g.iter().map(|b| kin.transforms[b.bone].apply(&b.mean_local)).collect(),
        std_devs: g.iter().map(|b| b.std_dev).collect(),
        densities: g.iter().map(|b| b.density).collect(),
        bones: g.iter().map(|b| b.bone).collect(),
        jacobians: None,
    }
}

/// Posed Gaussians with the analytic 3 × pose_dim Jacobian of every mean.
pub fn pose_jacobian(model: &ActorModel, pose: &PoseVector) -> Result<PosedGaussians> {
    model.validate()?;
    let kin = Kinematics::new(&model.skeleton, pose)?;
    let mut posed = pose_with(&kin, model);
    let jac = posed
        .means
        .iter()
        .zip(&posed.bones)
        .map(|(x, &b)| kin.point_jacobian(&model.skeleton, b, x))
        .collect();
    posed.jacobians = Some(jac);
    Ok(posed)
}

/// The shipped 16-joint, 91-Gaussian reference actor.
pub fn default_actor() -> ActorModel {
    crate::io::actor::parse_actor(crate::io::actor::DEFAULT_ACTOR_TOML, "default_actor.toml")
        .expect("embedded default actor is valid")
        .model
}
