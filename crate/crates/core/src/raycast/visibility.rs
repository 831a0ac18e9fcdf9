//! Closed-form absorption along pixel rays.
//!
//! Along a ray `o + t n` a Gaussian is a 1D Gaussian in `t` with the same
//! std-dev, peak `c̄ = c exp(-|Δ⊥|²/2σ²)` at `t = Δ·n`, `Δ = μ - o`.
//! Integrated over the whole line the optical depth is `√(2π) Σ σ c̄`.

use nalgebra::Vector3;

use super::camera::{pixel_ray, CameraModel, Ray};
use crate::scene::PosedGaussians;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Gaussians whose peak along the ray is below this are skipped.
pub const CULL_DENSITY: f64 = 1e-8;

/// A Gaussian restricted to a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayGaussian1D {
    pub sigma_bar: f64,
    pub c_bar: f64,
    pub s_peak: f64,
}

pub fn project_gaussian(origin: &Vector3<f64>, dir: &Vector3<f64>, mean: &Vector3<f64>, std_dev: f64, density: f64) -> RayGaussian1D {
    let delta = mean - origin;
    let s = delta.dot(dir);
    let d2 = (delta - dir * s).norm_squared();
    RayGaussian1D {
        sigma_bar: std_dev,
        c_bar: density * (-d2 / (2.0 * std_dev * std_dev)).exp(),
        s_peak: s,
    }
}

/// Fraction of light along the ray not absorbed by the model.
pub fn background_visibility(origin: &Vector3<f64>, dir: &Vector3<f64>, g: &PosedGaussians) -> f64 {
    let mut ops = 0;
    background_visibility_counted(origin, dir, g, &mut ops)
}

/// [`background_visibility`] that also counts Gaussian evaluations.
pub fn background_visibility_counted(origin: &Vector3<f64>, dir: &Vector3<f64>, g: &PosedGaussians, ops: &mut u64) -> f64 {
    let mut depth = 0.0;
    for q in 0..g.len() {
        *ops += 1;
        let p = project_gaussian(origin, dir, &g.means[q], g.std_devs[q], g.densities[q]);
        if p.c_bar >= CULL_DENSITY {
            depth += p.sigma_bar * p.c_bar;
        }
    }
    (-SQRT_2PI * depth).exp()
}

/// One Gaussian's contribution to a ray, kept for the backward pass.
#[derive(Clone, Copy, Debug)]
struct Hit {
    q: usize,
    delta: Vector3<f64>,
    c_bar: f64,
    /// `exp(-|Δ⊥|²/2σ²)`
    falloff: f64,
    s: f64,
    /// `Δ·∂n/∂u`, `Δ·∂n/∂v`
    a: [f64; 2],
}

/// Background visibility and its image gradient for one ray, with enough
/// state to back-propagate to the Gaussian parameters.
#[derive(Clone, Debug, Default)]
pub struct RayTerms {
    pub b: f64,
    pub grad: [f64; 2],
    depth: f64,
    flux: [f64; 2],
    hits: Vec<Hit>,
}

/// Adjoint accumulators per Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGrad {
    pub mean: Vec<Vector3<f64>>,
    pub std_dev: Vec<f64>,
    pub density: Vec<f64>,
}

impl GaussianGrad {
    pub fn zeros(n: usize) -> Self {
        Self {
            mean: vec![Vector3::zeros(); n],
            std_dev: vec![0.0; n],
            density: vec![0.0; n],
        }
    }

    pub fn add(&mut self, other: &GaussianGrad) {
        for (a, b) in self.mean.iter_mut().zip(&other.mean) {
            *a += b;
        }
        for (a, b) in self.std_dev.iter_mut().zip(&other.std_dev) {
            *a += b;
        }
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            *a += b;
        }
    }
}

impl RayTerms {
    /// Evaluates `B` and `∇B = (∂B/∂u, ∂B/∂v)` for `ray`.
    pub fn evaluate(&mut self, ray: &Ray, g: &PosedGaussians) {
        self.hits.clear();
        self.depth = 0.0;
        self.flux = [0.0; 2];
        for q in 0..g.len() {
            let sigma = g.std_devs[q];
            let delta = g.means[q] - ray.origin;
            let s = delta.dot(&ray.dir);
            let d2 = (delta - ray.dir * s).norm_squared();
            let falloff = (-d2 / (2.0 * sigma * sigma)).exp();
            let c_bar = g.densities[q] * falloff;
            if c_bar < CULL_DENSITY {
                continue;
            }
            let a = [delta.dot(&ray.d_dir[0]), delta.dot(&ray.d_dir[1])];
            self.depth += sigma * c_bar;
            let k = c_bar / sigma * s;
            self.flux[0] += k * a[0];
            self.flux[1] += k * a[1];
            self.hits.push(Hit {
                q,
                delta,
                c_bar,
                falloff,
                s,
                a,
            });
        }
        self.b = (-SQRT_2PI * self.depth).exp();
        let scale = -SQRT_2PI * self.b;
        self.grad = [scale * self.flux[0], scale * self.flux[1]];
    }

    /// Accumulates `d(adj_b·B + adj_grad·∇B)` w.r.t. every Gaussian's mean,
    /// std-dev and density into `out`.
    pub fn backprop(&self, ray: &Ray, g: &PosedGaussians, adj_b: f64, adj_grad: [f64; 2], out: &mut GaussianGrad) {
        if self.hits.is_empty() {
            return;
        }
        let wf = adj_grad[0] * self.flux[0] + adj_grad[1] * self.flux[1];
        // dE = -√(2π) B [ (adj_b - √(2π) w·F) dS + w·dF ]
        let pre = -SQRT_2PI * self.b;
        let coef_s = pre * (adj_b - SQRT_2PI * wf);
        for h in &self.hits {
            let sigma = g.std_devs[h.q];
            let s2 = sigma * sigma;
            let perp = h.delta - ray.dir * h.s;
            let d2 = perp.norm_squared();
            let cs = h.c_bar / sigma;
            // depth S = Σ σ c̄
            let ds_dmean = -perp * cs;
            let ds_dsigma = h.c_bar * (1.0 + d2 / s2);
            let ds_dc = sigma * h.falloff;
            let mut gm = ds_dmean * coef_s;
            let mut gs = ds_dsigma * coef_s;
            let mut gc = ds_dc * coef_s;
            // flux F_k = Σ (c̄/σ) s a_k
            for k in 0..2 {
                let w = pre * adj_grad[k];
                if w == 0.0 {
                    continue;
                }
                let f = cs * h.s * h.a[k];
                let dmean = (-perp * (h.s * h.a[k] / s2) + ray.dir * h.a[k] + ray.d_dir[k] * h.s) * cs;
                gm += dmean * w;
                gs += w * f * (d2 / s2 - 1.0) / sigma;
                gc += w * h.falloff / sigma * h.s * h.a[k];
            }
            out.mean[h.q] += gm;
            out.std_dev[h.q] += gs;
            out.density[h.q] += gc;
        }
    }
}

/// `B` and `∇B` at pixel `(u, v)`.
pub fn background_visibility_gradient(camera: &CameraModel, u: f64, v: f64, g: &PosedGaussians) -> (f64, [f64; 2]) {
    let ray = pixel_ray(camera, u, v);
    let mut t = RayTerms::default();
    t.evaluate(&ray, g);
    (t.b, t.grad)
}

/// Per-pixel `B` and `∇B` for a whole camera image (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityImage {
    pub width: usize,
    pub height: usize,
    pub background: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
}

impl VisibilityImage {
    pub fn grad_magnitude(&self) -> Vec<f64> {
        self.grad.iter().map(|g| g[0].hypot(g[1])).collect()
    }
}

pub fn render_visibility(camera: &CameraModel, g: &PosedGaussians, exec: crate::Exec) -> VisibilityImage {
    let (w, h) = (camera.width, camera.height);
    let rows = exec.map(h, |y| {
        let mut t = RayTerms::default();
        (0..w)
            .map(|x| {
                t.evaluate(&pixel_ray(camera, x as f64, y as f64), g);
                (t.b, t.grad)
            })
            .collect::<Vec<_>>()
    });
    let mut background = Vec::with_capacity(w * h);
    let mut grad = Vec::with_capacity(w * h);
    for row in rows {
        for (b, gr) in row {
            background.push(b);
            grad.push(gr);
        }
    }
    VisibilityImage {
        width: w,
        height: h,
        background,
        grad,
    }
}
