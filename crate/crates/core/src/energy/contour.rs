use nalgebra::Vector3;

use super::image::GradientImage;
use super::terms::{e_flat, e_flat_grad, e_sim, e_sim_grad};
use crate::exec::Exec;
use crate::raycast::{pixel_ray, CameraModel, GaussianGrad, RayTerms, CULL_DENSITY};
use crate::scene::PosedGaussians;

pub const TILE: usize = 8;

/// Gaussians that can reach `c̄ ≥ CULL_DENSITY` on some ray through the
/// pixel block `[x0, x1) × [y0, y1)`, in index order.
pub fn tile_candidates(camera: &CameraModel, g: &PosedGaussians, x0: usize, x1: usize, y0: usize, y1: usize) -> Vec<usize> {
    let (xc, yc) = ((x0 + x1 - 1) as f64 / 2.0, (y0 + y1 - 1) as f64 / 2.0);
    let center = pixel_ray(camera, xc, yc).dir;
    let corners = [
        (x0 as f64, y0 as f64),
        ((x1 - 1) as f64, y0 as f64),
        (x0 as f64, (y1 - 1) as f64),
        ((x1 - 1) as f64, (y1 - 1) as f64),
    ];
    let spread = corners
        .iter()
        .map(|&(u, v)| (pixel_ray(camera, u, v).dir - center).norm())
        .fold(0.0, f64::max)
        * 1.05;
    (0..g.len())
        .filter(|&q| {
            let delta: Vector3<f64> = g.means[q] - camera.center;
            let perp = delta.cross(&center).norm();
            let bound = perp - delta.norm() * spread;
            if bound <= 0.0 {
                return g.densities[q] >= CULL_DENSITY;
            }
            let s = g.std_devs[q];
            g.densities[q] * (-bound * bound / (2.0 * s * s)).exp() >= CULL_DENSITY
        })
        .collect()
}

/// Selects `idx` from `g` (means, std-devs, densities only).
pub(crate) fn subset(g: &PosedGaussians, idx: &[usize]) -> PosedGaussians {
    PosedGaussians {
        means: idx.iter().map(|&i| g.means[i]).collect(),
        std_devs: idx.iter().map(|&i| g.std_devs[i]).collect(),
        densities: idx.iter().map(|&i| g.densities[i]).collect(),
        bones: idx.iter().map(|&i| g.bones[i]).collect(),
        jacobians: None,
    }
}

/// Contour energy `Σ_pixels e_sim + e_flat` of one view and, if requested,
/// its gradient w.r.t. every Gaussian's parameters.
pub fn contour_view(
    camera: &CameraModel,
    target: &GradientImage,
    g: &PosedGaussians,
    delta_low: f64,
    want_grad: bool,
    exec: Exec,
) -> (f64, Option<GaussianGrad>) {
    assert_eq!((target.width, target.height), (camera.width, camera.height), "target size");
    let (w, h) = (camera.width, camera.height);
    let tiles_y = h.div_ceil(TILE);
    let tiles_x = w.div_ceil(TILE);
    let rows = exec.map(tiles_y, |ty| {
        let mut value = 0.0;
        let mut grad = want_grad.then(|| GaussianGrad::zeros(g.len()));
        let mut terms = RayTerms::default();
        let y0 = ty * TILE;
        let y1 = (y0 + TILE).min(h);
        for tx in 0..tiles_x {
            let x0 = tx * TILE;
            let x1 = (x0 + TILE).min(w);
            let idx = tile_candidates(camera, g, x0, x1, y0, y1);
            if idx.is_empty() {
                continue;
            }
            let local = subset(g, &idx);
            let mut local_grad = want_grad.then(|| GaussianGrad::zeros(idx.len()));
            for y in y0..y1 {
                for x in x0..x1 {
                    let ray = pixel_ray(camera, x as f64, y as f64);
                    terms.evaluate(&ray, &local);
                    let gi = target.at(x, y);
                    let gb = terms.grad;
                    value += e_sim(gb, gi) + e_flat(gb, gi, delta_low);
                    if let Some(lg) = local_grad.as_mut() {
                        let a = e_sim_grad(gb, gi);
                        let b = e_flat_grad(gb, gi, delta_low);
                        let adj = [a[0] + b[0], a[1] + b[1]];
                        if adj != [0.0, 0.0] {
                            terms.backprop(&ray, &local, 0.0, adj, lg);
                        }
                    }
                }
            }
            if let (Some(gr), Some(lg)) = (grad.as_mut(), local_grad) {
                for (k, &q) in idx.iter().enumerate() {
                    gr.mean[q] += lg.mean[k];
                    gr.std_dev[q] += lg.std_dev[k];
                    gr.density[q] += lg.density[k];
                }
            }
        }
        (value, grad)
    });
    let mut value = 0.0;
    let mut grad = want_grad.then(|| GaussianGrad::zeros(g.len()));
    for (v, gr) in rows {
        value += v;
        if let (Some(acc), Some(gr)) = (grad.as_mut(), gr) {
            acc.add(&gr);
        }
    }
    (value, grad)
}
