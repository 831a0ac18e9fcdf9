#![allow(dead_code, clippy::too_many_arguments)]

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sogfit::raycast::CameraModel;
use sogfit::scene::PosedGaussians;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Camera at the origin looking down +z.
pub fn axis_camera(width: usize, height: usize, focal: f64) -> CameraModel {
    let k = Matrix3::new(
        focal,
        0.0,
        (width as f64 - 1.0) / 2.0,
        0.0,
        focal,
        (height as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    CameraModel::new("axis", k, Matrix3::identity(), Vector3::zeros(), width, height).unwrap()
}

/// Random Gaussians in front of the origin camera, every one at least
/// 3σ ahead of it.
pub fn front_scene(rng: &mut ChaCha8Rng, n: usize) -> PosedGaussians {
    let mut means = Vec::new();
    let mut sig = Vec::new();
    let mut dens = Vec::new();
    for _ in 0..n {
        let s = rng.random_range(0.05..0.3);
        means.push(Vector3::new(
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.4..0.4),
            rng.random_range(2.0..5.0),
        ));
        sig.push(s);
        dens.push(rng.random_range(0.5..15.0));
    }
    PosedGaussians::from_world(means, sig, dens)
}

/// Unit direction from the origin toward a random point near the scene.
pub fn random_dir(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), 1.0).normalize()
}

/// Total density of the scene at `x`.
pub fn density_at(g: &PosedGaussians, x: &Vector3<f64>) -> f64 {
    (0..g.len())
        .map(|q| {
            let s = g.std_devs[q];
            g.densities[q] * (-(x - g.means[q]).norm_squared() / (2.0 * s * s)).exp()
        })
        .sum()
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Line integral of the scene density along `o + t n`, by adaptive Simpson
/// over pieces split at every Gaussian's closest approach.
pub fn optical_depth_quadrature(g: &PosedGaussians, o: &Vector3<f64>, n: &Vector3<f64>) -> f64 {
    let mut cuts: Vec<f64> = (0..g.len()).map(|q| (g.means[q] - o).dot(n)).collect();
    let span = 12.0 * g.std_devs.iter().cloned().fold(0.0, f64::max);
    let lo = cuts.iter().cloned().fold(f64::INFINITY, f64::min) - span;
    let hi = cuts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + span;
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    let f = |t: f64| density_at(g, &(o + n * t));
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-13))
        .sum()
}

/// Relative error with a floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(floor)
}

/// A small fitting problem: 8 Gaussians on the default skeleton, a
/// 50-dimensional shape space over random perturbations of it, two
/// cameras, three frames and contour plus heat-map targets rendered from
/// a nearby pose sequence.
pub struct TinyProblem {
    pub space: sogfit::shape::ShapeSpace,
    pub obs: sogfit::energy::Observations,
    pub poses: Vec<Vec<f64>>,
    pub s: Vec<f64>,
}

pub fn tiny_actor() -> sogfit::scene::ActorModel {
    let base = sogfit::scene::default_actor();
    let pick = ["pelvis", "spine", "head", "l_elbow", "r_wrist", "l_knee", "r_ankle", "neck"];
    let gaussians = pick
        .iter()
        .map(|name| {
            let j = base.skeleton.joint_index(name).unwrap();
            let mut g = base.gaussians.iter().find(|g| g.bone == j).unwrap().clone();
            g.std_dev *= 1.6;
            g.density *= 0.8;
            g
        })
        .collect();
    sogfit::scene::ActorModel::new(base.skeleton.clone(), gaussians, base.joint_gaussian).unwrap()
}

pub fn random_pose(rng: &mut ChaCha8Rng, skel: &sogfit::scene::Skeleton, spread: f64) -> Vec<f64> {
    let mut p: Vec<f64> = skel
        .limits()
        .iter()
        .map(|&(lo, hi)| {
            let v: f64 = rng.random_range(-spread..spread);
            if lo.is_finite() {
                v.clamp(lo + 0.05, hi - 0.05)
            } else {
                v
            }
        })
        .collect();
    p[0] *= 0.2;
    p[1] *= 0.2;
    p[2] *= 0.2;
    p
}

pub fn tiny_problem(seed: u64) -> TinyProblem {
    use sogfit::energy::{GradientImage, HeatMap, HeatMapSet, Observations};
    use sogfit::scene::{pose_gaussians, PoseVector};
    use sogfit::shape::{build_shape_space, ShapeInstance};
    let mut r = rng(seed);
    let template = tiny_actor();
    let base = ShapeInstance::from_model(&template);
    let instances: Vec<ShapeInstance> = (0..51)
        .map(|_| {
            let mut i = base.clone();
            for m in &mut i.means_local {
                *m += Vector3::new(
                    r.random_range(-0.01..0.01),
                    r.random_range(-0.01..0.01),
                    r.random_range(-0.01..0.01),
                );
            }
            for s in &mut i.std_devs {
                *s *= r.random_range(0.9..1.1);
            }
            for c in &mut i.densities {
                *c *= r.random_range(0.9..1.1);
            }
            for b in &mut i.bone_lengths {
                *b *= r.random_range(0.97..1.03);
            }
            i
        })
        .collect();
    let space = build_shape_space(template, &instances, 50, None).unwrap();
    let cameras = vec![
        CameraModel::look_at(
            "front",
            Vector3::new(0.3, 1.0, 3.5),
            Vector3::new(0.0, 0.9, 0.0),
            Vector3::y(),
            40.0,
            48,
            40,
        )
        .unwrap(),
        CameraModel::look_at(
            "side",
            Vector3::new(3.2, 1.2, 0.8),
            Vector3::new(0.0, 0.9, 0.0),
            Vector3::y(),
            40.0,
            40,
            48,
        )
        .unwrap(),
    ];
    let skel = &space.template.skeleton;
    let poses: Vec<Vec<f64>> = (0..3).map(|_| random_pose(&mut r, skel, 0.3)).collect();
    let s: Vec<f64> = space.std_devs.iter().map(|sd| r.random_range(-0.5..0.5) * sd).collect();
    let target_model = space.model(&space.zero()).unwrap();
    let mut contour = Vec::new();
    let mut heat = Vec::new();
    for cam in &cameras {
        let mut per_frame = Vec::new();
        let mut heat_frames = Vec::new();
        for p in &poses {
            let mut q = p.clone();
            for v in q.iter_mut().skip(6) {
                *v += r.random_range(-0.1..0.1);
            }
            let pose = PoseVector(q);
            let g = pose_gaussians(&target_model, &pose).unwrap();
            let vis = sogfit::raycast::render_visibility(cam, &g, sogfit::Exec::Sequential);
            let mut img = GradientImage::zeros(cam.width, cam.height);
            for (k, gr) in vis.grad.iter().enumerate() {
                img.grad[k] = [3.0 * gr[0] + r.random_range(-0.02..0.02), 3.0 * gr[1] + r.random_range(-0.02..0.02)];
            }
            img.clamp_magnitude(0.2);
            per_frame.push(img);
            let joints = target_model.joint_positions(&pose).unwrap();
            let maps = joints
                .iter()
                .map(|x| {
                    let mut m = HeatMap::zeros(cam.width / 2, cam.height / 2, 2.0);
                    let c = cam.project(x).unwrap();
                    for j in 0..m.height {
                        for i in 0..m.width {
                            let (u, v) = m.image_coords(i, j);
                            let d2 = (u - c[0]).powi(2) + (v - c[1]).powi(2);
                            m.data[j * m.width + i] = (-d2 / (2.0 * 9.0)).exp();
                        }
                    }
                    Some(m)
                })
                .collect();
            heat_frames.push(maps);
        }
        contour.push(per_frame);
        heat.push(heat_frames);
    }
    TinyProblem {
        space,
        obs: Observations {
            cameras,
            contour,
            heat: HeatMapSet { maps: heat },
        },
        poses,
        s,
    }
}
