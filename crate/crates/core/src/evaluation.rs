//! Fit quality metrics and the synthetic ground-truth harness.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::energy::{GradientImage, HeatMap, HeatMapSet, Observations, RgbImage, DELTA_HIGH};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raycast::{background_visibility, gaussian_visibility, pixel_ray, render_visibility, CameraModel};
use crate::scene::{pose_gaussians, ActorModel, PoseVector, PosedGaussians, ROOT_DOFS};
use crate::shape::{Mesh, ShapeSpace};

/// Binary image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }
}

/// Pixels where the model absorbs at least `tau` of the light.
pub fn render_silhouette(camera: &CameraModel, g: &PosedGaussians, tau: f64, exec: Exec) -> Result<Mask> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("silhouette threshold {tau} outside (0, 1)")));
    }
    let rows = exec.map(camera.height, |y| {
        (0..camera.width)
            .map(|x| {
                let ray = pixel_ray(camera, x as f64, y as f64);
                1.0 - background_visibility(&ray.origin, &ray.dir, g) >= tau
            })
            .collect::<Vec<_>>()
    });
    Ok(Mask {
        width: camera.width,
        height: camera.height,
        data: rows.concat(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: usize, den: usize, other_empty: bool) -> f64 {
    if den == 0 {
        if other_empty {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

fn overlap_counts(pred: &Mask, reference: &Mask) -> Result<(usize, usize, usize)> {
    if (pred.width, pred.height) != (reference.width, reference.height) {
        return Err(Error::invalid(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.width, pred.height, reference.width, reference.height
        )));
    }
    let both = pred.data.iter().zip(&reference.data).filter(|(a, b)| **a && **b).count();
    Ok((both, pred.count(), reference.count()))
}

/// Precision `|P∩R|/|P|` and recall `|P∩R|/|R|`. An empty denominator
/// gives 1 when both masks are empty and 0 otherwise.
pub fn overlap_metrics(pred: &Mask, reference: &Mask) -> Result<Overlap> {
    let (both, p, r) = overlap_counts(pred, reference)?;
    Ok(Overlap {
        precision: ratio(both, p, r == 0),
        recall: ratio(both, r, p == 0),
    })
}

/// Pooled overlap over many mask pairs plus the per-pair values.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapReport {
    pub precision: f64,
    pub recall: f64,
    pub per_frame: Vec<Overlap>,
}

pub fn overlap_report(pairs: &[(Mask, Mask)]) -> Result<OverlapReport> {
    let (mut both, mut p, mut r) = (0, 0, 0);
    let mut per_frame = Vec::with_capacity(pairs.len());
    for (pred, reference) in pairs {
        let c = overlap_counts(pred, reference)?;
        both += c.0;
        p += c.1;
        r += c.2;
        per_frame.push(overlap_metrics(pred, reference)?);
    }
    Ok(OverlapReport {
        precision: ratio(both, p, r == 0),
        recall: ratio(both, r, p == 0),
        per_frame,
    })
}

/// Joint positions of `model` for every frame.
pub fn joint_positions(model: &ActorModel, poses: &[Vec<f64>]) -> Result<Vec<Vec<Vector3<f64>>>> {
    poses.iter().map(|p| model.joint_positions(&PoseVector(p.clone()))).collect()
}

/// Mean joint distance per frame in millimetres. With `compensate`, the
/// per-joint offset observed in the first frame is subtracted in all later
/// frames.
pub fn joint_error(estimated: &[Vec<Vector3<f64>>], truth: &[Vec<Vector3<f64>>], compensate: bool) -> Result<Vec<f64>> {
    if estimated.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimated frames, {} true",
            estimated.len(),
            truth.len()
        )));
    }
    let mut out = Vec::with_capacity(truth.len());
    let offsets: Vec<Vector3<f64>> = match (estimated.first(), truth.first()) {
        (Some(e), Some(t)) if compensate => e.iter().zip(t).map(|(a, b)| a - b).collect(),
        _ => Vec::new(),
    };
    for (f, (e, t)) in estimated.iter().zip(truth).enumerate() {
        if e.len() != t.len() || e.is_empty() {
            return Err(Error::invalid(format!("frame {f}: {} estimated joints, {} true", e.len(), t.len())));
        }
        let sum: f64 = e
            .iter()
            .zip(t)
            .enumerate()
            .map(|(j, (a, b))| {
                let d = a - b;
                if compensate && f > 0 {
                    (d - offsets[j]).norm()
                } else {
                    d.norm()
                }
            })
            .sum();
        out.push(1000.0 * sum / e.len() as f64);
    }
    Ok(out)
}

/// Height of the rest-pose model above the floor: the top of its highest
/// Gaussian (mean plus one std-dev).
pub fn body_height(model: &ActorModel) -> f64 {
    model
        .rest_means()
        .iter()
        .zip(&model.gaussians)
        .map(|(m, g)| m.y + g.std_dev)
        .fold(0.0, f64::max)
}

/// Vertical extent of the rest-pose joints.
pub fn skeleton_height(model: &ActorModel) -> f64 {
    let p = model.skeleton.rest_positions();
    let top = p.iter().map(|x| x.y).fold(f64::NEG_INFINITY, f64::max);
    let bottom = p.iter().map(|x| x.y).fold(f64::INFINITY, f64::min);
    top - bottom
}

fn cross2(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull (counter-clockwise, monotone chain).
fn convex_hull(mut pts: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross2(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn polygon_area(p: &[Vector2<f64>]) -> f64 {
    (0..p.len())
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % p.len()]);
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

fn perimeter(p: &[Vector2<f64>]) -> f64 {
    (0..p.len()).map(|i| (p[(i + 1) % p.len()] - p[i]).norm()).sum()
}

/// Tape-measure circumference (cm) of `mesh` in the plane `axis·x = height`:
/// perimeter of the convex hull of the largest sliced component.
pub fn circumference(mesh: &Mesh, height: f64, axis: &Vector3<f64>) -> Result<f64> {
    let a = axis.try_normalize(1e-12).ok_or_else(|| Error::invalid("zero slicing axis"))?;
    let helper = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = a.cross(&helper).normalize();
    let e2 = a.cross(&e1);
    let (ids, count) = mesh.components();
    let mut per_component: Vec<Vec<Vector2<f64>>> = vec![Vec::new(); count];
    for t in &mesh.triangles {
        let v = t.map(|i| mesh.vertices[i]);
        let d = v.map(|x| a.dot(&x) - height);
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            if (d[i] < 0.0) != (d[j] < 0.0) {
                let s = d[i] / (d[i] - d[j]);
                let x = v[i] + (v[j] - v[i]) * s;
                per_component[ids[t[0]]].push(Vector2::new(e1.dot(&x), e2.dot(&x)));
            }
        }
    }
    per_component
        .into_iter()
        .filter(|p| p.len() >= 3)
        .map(convex_hull)
        .max_by(|a, b| polygon_area(a).total_cmp(&polygon_area(b)))
        .map(|h| 100.0 * perimeter(&h))
        .ok_or(Error::NoSlice)
}

/// Slicing heights as fractions of body height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurePlanes {
    pub chest: f64,
    pub waist: f64,
    pub hip: f64,
}

impl Default for MeasurePlanes {
    fn default() -> Self {
        Self {
            chest: 0.73,
            waist: 0.62,
            hip: 0.51,
        }
    }
}

/// Chest, waist and hip circumference (cm) of an upright mesh standing on
/// `y = 0` whose body height is `height`.
pub fn body_circumferences(mesh: &Mesh, height: f64, planes: &MeasurePlanes) -> Result<[f64; 3]> {
    let y = Vector3::y();
    Ok([
        circumference(mesh, planes.chest * height, &y)?,
        circumference(mesh, planes.waist * height, &y)?,
        circumference(mesh, planes.hip * height, &y)?,
    ])
}

/// Heat-map generator settings (lengths in image pixels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatMapSynth {
    /// Image pixels per heat-map pixel.
    pub scale: f64,
    pub blur_px: f64,
    pub jitter_px: f64,
    /// Extra modes per map.
    pub distractors: usize,
    pub distractor_gain: f64,
    pub distractor_distance_px: f64,
}

impl Default for HeatMapSynth {
    fn default() -> Self {
        Self {
            scale: 4.0,
            blur_px: 6.0,
            jitter_px: 0.0,
            distractors: 0,
            distractor_gain: 0.7,
            distractor_distance_px: 30.0,
        }
    }
}

/// Bumps at the projected joints of `model` posed by `poses`, optionally
/// jittered and with distractor modes. Values lie in [0, 1].
pub fn synth_heat_maps(
    model: &ActorModel,
    poses: &[Vec<f64>],
    cameras: &[CameraModel],
    params: &HeatMapSynth,
    rng: &mut ChaCha8Rng,
) -> Result<HeatMapSet> {
    if !(params.scale >= 1.0 && params.blur_px > 0.0 && params.jitter_px >= 0.0) {
        return Err(Error::invalid("heat-map scale must be >= 1 and blur > 0"));
    }
    let jitter = Normal::new(0.0, params.jitter_px.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let joints = joint_positions(model, poses)?;
    let mut maps = Vec::with_capacity(cameras.len());
    for cam in cameras {
        let w = (cam.width as f64 / params.scale).ceil() as usize;
        let h = (cam.height as f64 / params.scale).ceil() as usize;
        let mut frames = Vec::with_capacity(poses.len());
        for frame in &joints {
            let mut per_joint = Vec::with_capacity(frame.len());
            for x in frame {
                let mut map = HeatMap::zeros(w, h, params.scale);
                let mut modes: Vec<(Vector2<f64>, f64)> = Vec::new();
                if let Some(p) = cam.project(x) {
                    let j = Vector2::new(jitter.sample(rng), jitter.sample(rng));
                    modes.push((p + j, 1.0));
                    for _ in 0..params.distractors {
                        let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                        let off = Vector2::new(ang.cos(), ang.sin()) * params.distractor_distance_px;
                        modes.push((p + off, params.distractor_gain));
                    }
                }
                let s2 = 2.0 * params.blur_px * params.blur_px;
                for jy in 0..h {
                    for ix in 0..w {
                        let (u, v) = map.image_coords(ix, jy);
                        let val = modes
                            .iter()
                            .map(|(c, a)| a * (-((u - c.x).powi(2) + (v - c.y).powi(2)) / s2).exp())
                            .fold(0.0, f64::max);
                        map.data[jy * w + ix] = val;
                    }
                }
                per_joint.push(Some(map));
            }
            frames.push(per_joint);
        }
        maps.push(frames);
    }
    Ok(HeatMapSet { maps })
}

/// `clamp(gain · ∇B)` of `model` posed by each frame, per camera, optionally
/// added to a background gradient image before clamping.
pub fn synth_contour_targets(
    model: &ActorModel,
    poses: &[Vec<f64>],
    cameras: &[CameraModel],
    gain: f64,
    background: Option<&[GradientImage]>,
    exec: Exec,
) -> Result<Vec<Vec<GradientImage>>> {
    let posed = poses
        .iter()
        .map(|p| pose_gaussians(model, &PoseVector(p.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(cameras.len());
    for (c, cam) in cameras.iter().enumerate() {
        let mut frames = Vec::with_capacity(poses.len());
        for g in &posed {
            let vis = render_visibility(cam, g, exec);
            let mut img = GradientImage::zeros(cam.width, cam.height);
            for (k, v) in vis.grad.iter().enumerate() {
                img.grad[k] = [gain * v[0], gain * v[1]];
            }
            if let Some(bg) = background {
                let bg = &bg[c];
                if (bg.width, bg.height) != (cam.width, cam.height) {
                    return Err(Error::invalid("background gradient size differs from the camera"));
                }
                for (a, b) in img.grad.iter_mut().zip(&bg.grad) {
                    a[0] += b[0];
                    a[1] += b[1];
                }
            }
            img.clamp_magnitude(DELTA_HIGH);
            frames.push(img);
        }
        out.push(frames);
    }
    Ok(out)
}

/// Smooth random RGB texture: a sum of a few low-frequency waves.
pub fn textured_background(width: usize, height: usize, contrast: f64, rng: &mut ChaCha8Rng) -> RgbImage {
    let waves: Vec<(f64, f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            (
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(0.0..std::f64::consts::TAU),
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ],
            )
        })
        .collect();
    let mut img = RgbImage::filled(width, height, [0.5; 3]);
    for y in 0..height {
        for x in 0..width {
            let px = &mut img.data[y * width + x];
            for (fx, fy, ph, amp) in &waves {
                let s = (fx * x as f64 + fy * y as f64 + ph).sin() * contrast / waves.len() as f64;
                for k in 0..3 {
                    px[k] += amp[k] * s;
                }
            }
            for v in px.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Colour image of `g` over `background`: `Σ_q V_q colour_q + B · bg`.
pub fn render_rgb(camera: &CameraModel, g: &PosedGaussians, colors: &[[f64; 3]], background: &RgbImage, exec: Exec) -> RgbImage {
    let rows = exec.map(camera.height, |y| {
        (0..camera.width)
            .map(|x| {
                let ray = pixel_ray(camera, x as f64, y as f64);
                let v = gaussian_visibility(&ray.origin, &ray.dir, g);
                let b = background_visibility(&ray.origin, &ray.dir, g);
                let bg = background.get(x, y);
                let mut px = [b * bg[0], b * bg[1], b * bg[2]];
                for (vq, c) in v.iter().zip(colors) {
                    for k in 0..3 {
                        px[k] += vq * c[k];
                    }
                }
                px.map(|v| v.clamp(0.0, 1.0))
            })
            .collect::<Vec<_>>()
    });
    RgbImage {
        width: camera.width,
        height: camera.height,
        data: rows.concat(),
    }
}

/// Settings of a synthetic capture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub cameras: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub camera_distance: f64,
    pub camera_height: f64,
    /// Std-dev (radians) of the mean joint angles around the rest pose.
    pub pose_spread: f64,
    /// Amplitude (radians) of the per-joint oscillation over the sequence.
    pub motion: f64,
    /// Ground-truth shape coefficients are drawn with this many training
    /// std-devs.
    pub shape_sigma: f64,
    pub contour_gain: f64,
    pub heat: HeatMapSynth,
    /// Procedural training bodies for the shape space.
    pub database_size: usize,
    pub background: [f64; 3],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            cameras: 3,
            frames: 10,
            width: 160,
            height: 120,
            focal: 150.0,
            camera_distance: 4.0,
            camera_height: 1.2,
            pose_spread: 0.2,
            motion: 0.1,
            shape_sigma: 0.5,
            contour_gain: 1.0,
            heat: HeatMapSynth::default(),
            database_size: 40,
            background: [0.55, 0.6, 0.5],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cameras == 0 || self.frames == 0 || self.width < 8 || self.height < 8 {
            return Err(Error::invalid("scenario needs >= 1 camera, >= 1 frame and images of at least 8x8"));
        }
        if !(self.focal > 0.0 && self.camera_distance > 0.0) {
            return Err(Error::invalid("scenario focal length and camera distance must be positive"));
        }
        Ok(())
    }

    /// Cameras evenly spaced on a circle around the origin, looking at the
    /// body center; camera 0 faces the actor's front.
    pub fn camera_rig(&self) -> Result<Vec<CameraModel>> {
        (0..self.cameras)
            .map(|c| {
                let a = std::f64::consts::TAU * c as f64 / self.cameras as f64;
                let eye = Vector3::new(self.camera_distance * a.sin(), self.camera_height, self.camera_distance * a.cos());
                CameraModel::look_at(
                    format!("cam{c}"),
                    eye,
                    Vector3::new(0.0, 0.9, 0.0),
                    Vector3::y(),
                    self.focal,
                    self.width,
                    self.height,
                )
            })
            .collect()
    }
}

/// Ground truth and rendered observations of one synthetic capture.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub config: ScenarioConfig,
    pub poses: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub model: ActorModel,
    pub obs: Observations,
    pub silhouettes: Vec<Vec<Mask>>,
}

/// Smooth joint-angle sequence inside the limits: a random mean pose with
/// bent elbows and knees plus a per-joint sinusoid.
pub fn synth_motion(model: &ActorModel, config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let skel = &model.skeleton;
    let limits = skel.limits();
    let dim = skel.pose_dim();
    let spread = Normal::new(0.0, config.pose_spread.max(1e-12)).expect("finite spread");
    let mut base: Vec<f64> = (0..dim).map(|_| spread.sample(rng)).collect();
    base[..3].fill(0.0);
    base[3] = 0.0;
    base[5] = 0.0;
    base[4] = rng.random_range(-0.4..0.4);
    for name in ["l_elbow", "r_elbow", "l_knee", "r_knee"] {
        if let Some(j) = skel.joint_index(name) {
            let k = skel.dof_offset(j);
            let (lo, hi) = limits[k];
            // bend away from the straight rest pose, on the allowed side
            let bend = if hi.abs() >= lo.abs() { 0.5 } else { -0.5 };
            base[k] += bend;
        }
    }
    let phase: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let amp: Vec<f64> = (0..dim)
        .map(|_| rng.random_range(0.0..config.motion.max(0.0) + f64::MIN_POSITIVE))
        .collect();
    (0..config.frames)
        .map(|t| {
            let w = 2.0 * std::f64::consts::PI * t as f64 / (config.frames.max(2) as f64 * 1.5);
            (0..dim)
                .map(|k| {
                    let v = base[k] + amp[k] * (w + phase[k]).sin();
                    if k < ROOT_DOFS {
                        if k == 0 || k == 2 {
                            0.02 * (w + phase[k]).sin()
                        } else if k == 1 {
                            0.0
                        } else {
                            base[k] + 0.2 * amp[k] * (w + phase[k]).sin()
                        }
                    } else {
                        let (lo, hi) = limits[k];
                        v.clamp(lo + 0.12, hi - 0.12)
                    }
                })
                .collect()
        })
        .collect()
}

impl SyntheticScene {
    /// Draws ground truth from `config.seed` and renders every target.
    pub fn generate(config: &ScenarioConfig, space: &ShapeSpace, exec: Exec) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s: Vec<f64> = space
            .std_devs
            .iter()
            .zip(&space.bounds)
            .map(|(sd, b)| {
                let n = Normal::new(0.0, (config.shape_sigma * sd).max(1e-300)).expect("finite");
                n.sample(&mut rng).clamp(-b, *b)
            })
            .collect();
        let model = space.model(&s)?;
        let poses = synth_motion(&model, config, &mut rng);
        let cameras = config.camera_rig()?;
        let contour = synth_contour_targets(&model, &poses, &cameras, config.contour_gain, None, exec)?;
        let heat = synth_heat_maps(&model, &poses, &cameras, &config.heat, &mut rng)?;
        let mut silhouettes = Vec::with_capacity(cameras.len());
        for cam in &cameras {
            let mut frames = Vec::with_capacity(poses.len());
            for p in &poses {
                let g = pose_gaussians(&model, &PoseVector(p.clone()))?;
                frames.push(render_silhouette(cam, &g, 0.5, exec)?);
            }
            silhouettes.push(frames);
        }
        Ok(Self {
            config: config.clone(),
            poses,
            s,
            model,
            obs: Observations { cameras, contour, heat },
            silhouettes,
        })
    }

    /// Colour images of every camera and frame over a flat background.
    pub fn render_images(&self, exec: Exec) -> Result<Vec<Vec<RgbImage>>> {
        let colors: Vec<[f64; 3]> = self.model.gaussians.iter().map(|g| g.color.unwrap_or([0.5; 3])).collect();
        let mut out = Vec::with_capacity(self.obs.cameras.len());
        for cam in &self.obs.cameras {
            let bg = RgbImage::filled(cam.width, cam.height, self.config.background);
            let mut frames = Vec::with_capacity(self.poses.len());
            for p in &self.poses {
                let g = pose_gaussians(&self.model, &PoseVector(p.clone()))?;
                frames.push(render_rgb(cam, &g, &colors, &bg, exec));
            }
            out.push(frames);
        }
        Ok(out)
    }
}
