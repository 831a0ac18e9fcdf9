use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::contour::contour_view;
use super::detection::{detection_view, HeatMap, HeatMapSet};
use super::image::GradientImage;
use super::terms::{e_pose_prior, e_shape_prior, e_smooth_prior};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raycast::{CameraModel, GaussianGrad};
use crate::scene::{pose_gaussians, ActorModel, Kinematics, PoseVector, PosedGaussians};
use crate::shape::{ShapeInstance, ShapeSpace, MIN_STD_DEV};

/// Term weights and image constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub w_data: f64,
    pub w_smooth: f64,
    pub w_pose: f64,
    pub w_shape: f64,
    pub delta_low: f64,
    pub delta_high: f64,
    pub sobel_sigma: f64,
    /// Heat-map values at or below this count as zero.
    pub heat_threshold: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            w_data: 1.0,
            w_smooth: 0.1,
            w_pose: 1.0,
            w_shape: 1.0,
            delta_low: super::DELTA_LOW,
            delta_high: super::DELTA_HIGH,
            sobel_sigma: super::SOBEL_SIGMA,
            heat_threshold: 0.01,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("w_data", self.w_data),
            ("w_smooth", self.w_smooth),
            ("w_pose", self.w_pose),
            ("w_shape", self.w_shape),
            ("delta_low", self.delta_low),
            ("delta_high", self.delta_high),
            ("sobel_sigma", self.sobel_sigma),
            ("heat_threshold", self.heat_threshold),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("energy.{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which data term drives the fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Heat-map overlap of the joint Gaussians.
    Detection,
    /// Image-gradient alignment of the full model.
    Contour,
}

/// Per-camera inputs. `contour[c][t]` and `heat` may be empty when the
/// corresponding stage is not run.
#[derive(Clone, Debug, Default)]
pub struct Observations {
    pub cameras: Vec<CameraModel>,
    pub contour: Vec<Vec<GradientImage>>,
    pub heat: HeatMapSet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    pub data: f64,
    pub smooth: f64,
    pub pose: f64,
    pub shape: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.data + self.smooth + self.pose + self.shape
    }
}

/// Weighted energy value with per-term breakdown and, if requested, the
/// gradient w.r.t. every frame pose and the shape coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyEval {
    pub value: f64,
    pub terms: EnergyTerms,
    pub grad_poses: Vec<Vec<f64>>,
    pub grad_shape: Vec<f64>,
}

/// The full objective over a fixed set of observations.
pub struct Energy<'a> {
    pub space: &'a ShapeSpace,
    pub obs: &'a Observations,
    pub config: EnergyConfig,
    /// Joints whose heat maps take part in the detection term.
    pub detection_joints: Vec<bool>,
    pub exec: Exec,
}

struct FrameData {
    kin: Kinematics,
    body: PosedGaussians,
    joints: PosedGaussians,
}

impl<'a> Energy<'a> {
    pub fn new(space: &'a ShapeSpace, obs: &'a Observations, config: EnergyConfig, exec: Exec) -> Self {
        Self {
            space,
            obs,
            config,
            detection_joints: vec![true; space.num_bones()],
            exec,
        }
    }

    fn check(&self, poses: &[Vec<f64>], s: &[f64], stage: Stage) -> Result<()> {
        self.config.validate()?;
        if s.len() != self.space.dim() {
            return Err(Error::invalid(format!(
                "{} shape coefficients for a {}-dimensional space",
                s.len(),
                self.space.dim()
            )));
        }
        let dim = self.space.template.skeleton.pose_dim();
        for (t, p) in poses.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!("frame {t} pose has {} values, expected {dim}", p.len())));
            }
        }
        let cams = self.obs.cameras.len();
        match stage {
            Stage::Contour => {
                if self.obs.contour.len() != cams || self.obs.contour.iter().any(|c| c.len() != poses.len()) {
                    return Err(Error::invalid("contour targets do not cover every camera and frame"));
                }
            }
            Stage::Detection => {
                if self.obs.heat.num_cameras() != cams {
                    return Err(Error::invalid("heat maps do not cover every camera"));
                }
            }
        }
        Ok(())
    }

    /// Energy and gradient at `(poses, s)`.
    pub fn evaluate(&self, poses: &[Vec<f64>], s: &[f64], stage: Stage, want_grad: bool) -> Result<EnergyEval> {
        self.check(poses, s, stage)?;
        let cfg = &self.config;
        let inst = self.space.evaluate(s)?;
        let model = inst.to_model(&self.space.template)?;
        let frames = poses
            .iter()
            .map(|p| {
                let pose = PoseVector(p.clone());
                let kin = Kinematics::new(&model.skeleton, &pose)?;
                let body = pose_gaussians(&model, &pose)?;
                let joints = model.posed_joint_gaussians(&pose)?;
                Ok(FrameData { kin, body, joints })
            })
            .collect::<Result<Vec<_>>>()?;

        let cams = self.obs.cameras.len();
        let t_count = poses.len();
        let views = self.exec.map(cams * t_count, |k| {
            let (t, c) = (k / cams, k % cams);
            self.data_view(c, t, &frames[t], stage, want_grad)
        });
        let mut terms = EnergyTerms::default();
        let mut grad_poses = vec![vec![0.0; model.skeleton.pose_dim()]; t_count];
        let mut stack_grad = DVector::zeros(ShapeInstance::stack_len(self.space.num_gaussians(), self.space.num_bones()));
        for t in 0..t_count {
            let mut frame_grad: Option<GaussianGrad> = None;
            for c in 0..cams {
                let (v, g) = &views[t * cams + c];
                terms.data += cfg.w_data * v;
                if let Some(g) = g {
                    match frame_grad.as_mut() {
                        Some(acc) => acc.add(g),
                        None => frame_grad = Some(g.clone()),
                    }
                }
            }
            if let Some(g) = frame_grad.filter(|_| want_grad && cfg.w_data != 0.0) {
                self.chain_frame(
                    &model,
                    &inst,
                    &frames[t],
                    stage,
                    &g,
                    cfg.w_data,
                    &mut grad_poses[t],
                    &mut stack_grad,
                );
            }
        }

        let limits = model.skeleton.limits();
        for (t, p) in poses.iter().enumerate() {
            let (e, g) = e_pose_prior(p, &limits);
            terms.pose += cfg.w_pose * e;
            for (a, b) in grad_poses[t].iter_mut().zip(g) {
                *a += cfg.w_pose * b;
            }
        }
        let (e, g) = e_smooth_prior(poses);
        terms.smooth = cfg.w_smooth * e;
        for (gp, gs) in grad_poses.iter_mut().zip(g) {
            for (a, b) in gp.iter_mut().zip(gs) {
                *a += cfg.w_smooth * b;
            }
        }
        let (e, g) = e_shape_prior(s, &self.space.bounds);
        terms.shape = cfg.w_shape * e;
        let mut grad_shape = self.space.pullback(&stack_grad);
        for (a, b) in grad_shape.iter_mut().zip(g) {
            *a += cfg.w_shape * b;
        }
        if !want_grad {
            grad_poses.iter_mut().for_each(|g| g.fill(0.0));
            grad_shape.fill(0.0);
        }
        Ok(EnergyEval {
            value: terms.total(),
            terms,
            grad_poses,
            grad_shape,
        })
    }

    fn data_view(&self, c: usize, t: usize, frame: &FrameData, stage: Stage, want_grad: bool) -> (f64, Option<GaussianGrad>) {
        let camera = &self.obs.cameras[c];
        match stage {
            Stage::Contour => contour_view(
                camera,
                &self.obs.contour[c][t],
                &frame.body,
                self.config.delta_low,
                want_grad,
                Exec::Sequential,
            ),
            Stage::Detection => {
                let maps: Vec<Option<&HeatMap>> = (0..frame.joints.len()).map(|j| self.obs.heat.get(c, t, j)).collect();
                let (v, g) = detection_view(camera, &maps, &self.detection_joints, &frame.joints, self.config.heat_threshold);
                (v, want_grad.then_some(g))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn chain_frame(
        &self,
        model: &ActorModel,
        inst: &ShapeInstance,
        frame: &FrameData,
        stage: Stage,
        g: &GaussianGrad,
        w: f64,
        grad_pose: &mut [f64],
        stack_grad: &mut DVector<f64>,
    ) {
        let skel = &model.skeleton;
        let q_count = self.space.num_gaussians();
        let posed = match stage {
            Stage::Contour => &frame.body,
            Stage::Detection => &frame.joints,
        };
        let pg = frame
            .kin
            .backprop(skel, (0..posed.len()).map(|q| (posed.bones[q], posed.means[q], w * g.mean[q])));
        for (a, b) in grad_pose.iter_mut().zip(&pg.pose) {
            *a += b;
        }
        for (j, b) in pg.bone_lengths.iter().enumerate() {
            if inst.bone_lengths[j] > 0.0 {
                stack_grad[5 * q_count + j] += b;
            }
        }
        if stage == Stage::Contour {
            for q in 0..q_count {
                let rot = frame.kin.transforms[frame.body.bones[q]].rot;
                let local = rot.transpose() * (w * g.mean[q]);
                for k in 0..3 {
                    stack_grad[3 * q + k] += local[k];
                }
                if inst.std_devs[q] > MIN_STD_DEV {
                    stack_grad[3 * q_count + q] += w * g.std_dev[q];
                }
                if inst.densities[q] > 0.0 {
                    stack_grad[4 * q_count + q] += w * g.density[q];
                }
            }
        }
    }
}
