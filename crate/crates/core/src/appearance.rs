//! Per-Gaussian colour from multi-view images: visibility-weighted view
//! means followed by iterative outlier rejection across views.

use crate::energy::RgbImage;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raycast::{gaussian_visibility, pixel_ray, CameraModel};
use crate::scene::{pose_gaussians, ActorModel, PoseVector, PosedGaussians};

/// Views where a Gaussian's summed visibility is below this are dropped.
pub const MIN_VIEW_WEIGHT: f64 = 1e-9;

/// Mean colour of one Gaussian in one view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorCandidate {
    /// Orders candidates and breaks ties during rejection.
    pub source: usize,
    pub color: [f64; 3],
    pub weight: f64,
}

/// Visibility-weighted mean colour of every Gaussian in one view; `None`
/// where the Gaussian is (numerically) invisible.
pub fn view_colors(
    camera: &CameraModel,
    image: &RgbImage,
    g: &PosedGaussians,
    source: usize,
    exec: Exec,
) -> Result<Vec<Option<ColorCandidate>>> {
    if (image.width, image.height) != (camera.width, camera.height) {
        return Err(Error::invalid(format!(
            "image is {}x{}, camera {} is {}x{}",
            image.width, image.height, camera.name, camera.width, camera.height
        )));
    }
    let n = g.len();
    let rows = exec.map(camera.height, |y| {
        let mut acc = vec![[0.0; 4]; n];
        for x in 0..camera.width {
            let ray = pixel_ray(camera, x as f64, y as f64);
            let v = gaussian_visibility(&ray.origin, &ray.dir, g);
            let px = image.get(x, y);
            for (a, vq) in acc.iter_mut().zip(&v) {
                if *vq != 0.0 {
                    a[0] += vq * px[0];
                    a[1] += vq * px[1];
                    a[2] += vq * px[2];
                    a[3] += vq;
                }
            }
        }
        acc
    });
    let mut total = vec![[0.0; 4]; n];
    for row in rows {
        for (t, r) in total.iter_mut().zip(row) {
            for k in 0..4 {
                t[k] += r[k];
            }
        }
    }
    Ok(total
        .into_iter()
        .map(|a| {
            (a[3] >= MIN_VIEW_WEIGHT).then(|| ColorCandidate {
                source,
                color: [a[0] / a[3], a[1] / a[3], a[2] / a[3]],
                weight: a[3],
            })
        })
        .collect())
}

/// Colour of Gaussian `q` in one view and its total visibility weight.
pub fn view_color(camera: &CameraModel, image: &RgbImage, g: &PosedGaussians, q: usize) -> Result<Option<([f64; 3], f64)>> {
    Ok(view_colors(camera, image, g, 0, Exec::Sequential)?[q].map(|c| (c.color, c.weight)))
}

/// Mean taken relative to the first colour, so identical colours average
/// to themselves exactly.
fn mean(c: &[ColorCandidate]) -> [f64; 3] {
    let base = c[0].color;
    let mut d = [0.0; 3];
    for x in c {
        for k in 0..3 {
            d[k] += x.color[k] - base[k];
        }
    }
    [0, 1, 2].map(|k| base[k] + d[k] / c.len() as f64)
}

/// Repeatedly removes the candidate farthest from the unweighted mean until
/// half of them (rounded up, at least one kept) are gone; returns the mean
/// of the rest. Equal distances remove the lowest `source` first.
pub fn robust_color(candidates: &[ColorCandidate]) -> Option<[f64; 3]> {
    if candidates.is_empty() {
        return None;
    }
    let mut left = candidates.to_vec();
    left.sort_by_key(|c| c.source);
    let n = left.len();
    let remove = n.div_ceil(2).min(n - 1);
    for _ in 0..remove {
        let m = mean(&left);
        let mut worst = 0;
        let mut worst_d = -1.0;
        for (i, c) in left.iter().enumerate() {
            let d = (0..3).map(|k| (c.color[k] - m[k]).powi(2)).sum::<f64>();
            if d > worst_d {
                worst = i;
                worst_d = d;
            }
        }
        left.remove(worst);
    }
    Some(mean(&left))
}

/// Colours every Gaussian of `model` from `images[camera][frame]` seen at
/// `poses[frame]`. Gaussians without any visible candidate keep their
/// previous colour.
pub fn colorize(
    model: &ActorModel,
    poses: &[Vec<f64>],
    cameras: &[CameraModel],
    images: &[Vec<RgbImage>],
    exec: Exec,
) -> Result<(ActorModel, Vec<Vec<ColorCandidate>>)> {
    if images.len() != cameras.len() || images.iter().any(|i| i.len() != poses.len()) {
        return Err(Error::invalid("images must cover every camera and frame"));
    }
    let q = model.gaussians.len();
    let mut candidates = vec![Vec::new(); q];
    for (t, p) in poses.iter().enumerate() {
        let g = pose_gaussians(model, &PoseVector(p.clone()))?;
        for (c, cam) in cameras.iter().enumerate() {
            let views = view_colors(cam, &images[c][t], &g, c * poses.len() + t, exec)?;
            for (k, v) in views.into_iter().enumerate() {
                candidates[k].extend(v);
            }
        }
    }
    let mut out = model.clone();
    for (k, blob) in out.gaussians.iter_mut().enumerate() {
        match robust_color(&candidates[k]) {
            Some(c) => blob.color = Some(c),
            None => log::warn!("gaussian {k} is not visible in any view; colour left unchanged"),
        }
    }
    Ok((out, candidates))
}
