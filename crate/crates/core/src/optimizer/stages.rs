use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::descent::{minimize, DescentConfig, Evaluation, TraceRow};
use crate::energy::{Energy, EnergyConfig, Observations, Stage};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raycast::CameraModel;
use crate::scene::{ActorModel, JointGroup, ROOT_DOFS};
use crate::shape::ShapeSpace;

/// Tunables of the full fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub energy: EnergyConfig,
    pub descent: DescentConfig,
    /// Iteration cap of each detection phase.
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Optimize shape in the last detection phase.
    pub stage1_shape: bool,
    pub stage2_shape: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            energy: EnergyConfig::default(),
            descent: DescentConfig::default(),
            stage1_iters: 150,
            stage2_iters: 2000,
            stage1_shape: true,
            stage2_shape: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Root and torso joints against torso-level detections.
    Torso,
    /// Limb joints against all detections.
    Limbs,
    /// All pose parameters (and shape) against all detections.
    Refine,
    /// Contour refinement of everything.
    Contour,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Torso => "1a",
            Phase::Limbs => "1b",
            Phase::Refine => "1c",
            Phase::Contour => "2",
        }
    }
}

/// Poses, shape coefficients and the trace of the run that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub poses: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl FitResult {
    pub fn model(&self, space: &ShapeSpace) -> Result<ActorModel> {
        space.model(&self.s)
    }
}

/// Point closest (least squares) to every camera's optical axis, dropped
/// to the floor plane `y = 0`.
pub fn capture_center(cameras: &[CameraModel]) -> Vector3<f64> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for cam in cameras {
        let d = cam.axis();
        let p = Matrix3::identity() - d * d.transpose();
        a += p;
        b += p * cam.center;
    }
    let c = match a.try_inverse() {
        Some(inv) if cameras.len() > 1 => inv * b,
        _ => cameras.first().map(|c| c.center + c.axis() * 3.0).unwrap_or_else(Vector3::zeros),
    };
    Vector3::new(c.x, 0.0, c.z)
}

/// T-pose at the capture-volume center for every frame.
pub fn initial_poses(space: &ShapeSpace, cameras: &[CameraModel], frames: usize) -> Vec<Vec<f64>> {
    let c = capture_center(cameras);
    let mut p = vec![0.0; space.template.skeleton.pose_dim()];
    p[..3].copy_from_slice(c.as_slice());
    vec![p; frames]
}

fn shape_scales(space: &ShapeSpace) -> Vec<f64> {
    space.std_devs.iter().map(|s| s.max(1e-6)).collect()
}

fn run_phase(
    energy: &Energy,
    stage: Stage,
    phase: Phase,
    poses: &mut [Vec<f64>],
    s: &mut [f64],
    pose_active: &[bool],
    shape_active: bool,
    config: &SolverConfig,
    max_iters: usize,
    trace: &mut Vec<TraceRow>,
) -> Result<()> {
    let t = poses.len();
    let dim = pose_active.len();
    let mut x: Vec<f64> = poses.iter().flatten().cloned().collect();
    x.extend_from_slice(s);
    let mut scales = vec![1.0; dim * t];
    scales.extend(shape_scales(energy.space));
    let mut active: Vec<bool> = (0..t).flat_map(|_| pose_active.iter().cloned()).collect();
    active.extend(std::iter::repeat_n(shape_active, s.len()));
    let objective = |x: &[f64]| -> Result<Evaluation> {
        let ps: Vec<Vec<f64>> = x[..dim * t].chunks(dim).map(|c| c.to_vec()).collect();
        let e = energy.evaluate(&ps, &x[dim * t..], stage, true)?;
        let mut grad: Vec<f64> = e.grad_poses.into_iter().flatten().collect();
        grad.extend(e.grad_shape);
        Ok(Evaluation {
            value: e.value,
            grad,
            terms: e.terms,
        })
    };
    let state = minimize(objective, x, &scales, &active, &config.descent, max_iters, phase.label(), trace)?;
    for (k, p) in poses.iter_mut().enumerate() {
        p.copy_from_slice(&state.x[k * dim..(k + 1) * dim]);
    }
    s.copy_from_slice(&state.x[dim * t..]);
    Ok(())
}

/// Hierarchical detection fit from the T-pose at the capture center:
/// root and torso, then limbs, then everything.
pub fn solve_stage1(space: &ShapeSpace, obs: &Observations, config: &SolverConfig, exec: Exec) -> Result<FitResult> {
    if obs.heat.is_empty() {
        return Err(Error::Initialization("heat maps are empty".into()));
    }
    let frames = obs.heat.maps.first().map(|m| m.len()).unwrap_or(0);
    if frames == 0 || obs.heat.maps.iter().any(|m| m.len() != frames) {
        return Err(Error::Initialization("heat maps must cover the same frames in every camera".into()));
    }
    let skel = &space.template.skeleton;
    let dim = skel.pose_dim();
    let mut poses = initial_poses(space, &obs.cameras, frames);
    let mut s = space.zero();
    let mut trace = Vec::new();

    let torso: Vec<usize> = skel.group_params(JointGroup::Torso);
    let limbs: Vec<usize> = skel.group_params(JointGroup::Limb);
    let mut mask_a = vec![false; dim];
    mask_a[..ROOT_DOFS].iter_mut().for_each(|m| *m = true);
    torso.iter().for_each(|&k| mask_a[k] = true);
    let mut mask_b = vec![false; dim];
    limbs.iter().for_each(|&k| mask_b[k] = true);
    let mask_c = vec![true; dim];

    let joints = skel.joints();
    let torso_level: Vec<bool> = joints
        .iter()
        .map(|j| j.parent.is_none_or(|p| joints[p].group == JointGroup::Torso))
        .collect();

    let mut energy = Energy::new(space, obs, config.energy.clone(), exec);
    energy.detection_joints = torso_level;
    run_phase(
        &energy,
        Stage::Detection,
        Phase::Torso,
        &mut poses,
        &mut s,
        &mask_a,
        false,
        config,
        config.stage1_iters,
        &mut trace,
    )?;
    energy.detection_joints = vec![true; joints.len()];
    run_phase(
        &energy,
        Stage::Detection,
        Phase::Limbs,
        &mut poses,
        &mut s,
        &mask_b,
        false,
        config,
        config.stage1_iters,
        &mut trace,
    )?;
    run_phase(
        &energy,
        Stage::Detection,
        Phase::Refine,
        &mut poses,
        &mut s,
        &mask_c,
        config.stage1_shape,
        config,
        config.stage1_iters,
        &mut trace,
    )?;
    Ok(FitResult { poses, s, trace })
}

/// Joint contour refinement of all poses and the shape.
pub fn solve_stage2(space: &ShapeSpace, obs: &Observations, init: &FitResult, config: &SolverConfig, exec: Exec) -> Result<FitResult> {
    if obs.contour.is_empty() {
        return Err(Error::MissingInput("contour refinement needs image gradients".into()));
    }
    let dim = space.template.skeleton.pose_dim();
    let mut poses = init.poses.clone();
    let mut s = init.s.clone();
    let mut trace = init.trace.clone();
    let energy = Energy::new(space, obs, config.energy.clone(), exec);
    run_phase(
        &energy,
        Stage::Contour,
        Phase::Contour,
        &mut poses,
        &mut s,
        &vec![true; dim],
        config.stage2_shape,
        config,
        config.stage2_iters,
        &mut trace,
    )?;
    Ok(FitResult { poses, s, trace })
}

/// Detection initialization followed by contour refinement.
pub fn solve(space: &ShapeSpace, obs: &Observations, config: &SolverConfig, exec: Exec) -> Result<(FitResult, ActorModel)> {
    let init = solve_stage1(space, obs, config, exec)?;
    let fit = solve_stage2(space, obs, &init, config, exec)?;
    let model = fit.model(space)?;
    Ok((fit, model))
}
