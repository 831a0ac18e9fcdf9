use crate::raycast::{gaussian_visibility_adjoint, pixel_ray, CameraModel, GaussianGrad};
use crate::scene::PosedGaussians;

/// Joint-location probability grid for one camera, frame and joint.
/// Heat-map pixel `(i, j)` covers image pixels around
/// `((i + 0.5)·scale - 0.5, (j + 0.5)·scale - 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatMap {
    pub width: usize,
    pub height: usize,
    pub scale: f64,
    pub data: Vec<f64>,
}

impl HeatMap {
    pub fn zeros(width: usize, height: usize, scale: f64) -> Self {
        Self {
            width,
            height,
            scale,
            data: vec![0.0; width * height],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    pub fn image_coords(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.scale - 0.5, (j as f64 + 0.5) * self.scale - 0.5)
    }
}

/// Heat maps indexed `[camera][frame][joint]`; absent maps are `None`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HeatMapSet {
    pub maps: Vec<Vec<Vec<Option<HeatMap>>>>,
}

impl HeatMapSet {
    pub fn get(&self, camera: usize, frame: usize, joint: usize) -> Option<&HeatMap> {
        self.maps.get(camera)?.get(frame)?.get(joint)?.as_ref()
    }

    pub fn num_cameras(&self) -> usize {
        self.maps.len()
    }

    /// True when no map has a positive value.
    pub fn is_empty(&self) -> bool {
        !self
            .maps
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .any(|m| m.data.iter().any(|v| *v > 0.0))
    }
}

/// `-Σ_j Σ_pixels D_j V_j` for one view, with the gradient w.r.t. the joint
/// Gaussians. Map values at or below `threshold` count as zero and pixels
/// with no value above it are skipped; joints whose map is `None` or masked
/// out by `use_joint` are skipped.
pub fn detection_view(
    camera: &CameraModel,
    maps: &[Option<&HeatMap>],
    use_joint: &[bool],
    joints: &PosedGaussians,
    threshold: f64,
) -> (f64, GaussianGrad) {
    let mut grad = GaussianGrad::zeros(joints.len());
    let live: Vec<usize> = (0..maps.len()).filter(|&j| maps[j].is_some() && use_joint[j]).collect();
    let Some(first) = live.first().map(|&j| maps[j].unwrap()) else {
        return (0.0, grad);
    };
    let mut value = 0.0;
    let mut weights = vec![0.0; joints.len()];
    for y in 0..first.height {
        for x in 0..first.width {
            let mut any = false;
            for &j in &live {
                let d = maps[j].unwrap().at(x, y);
                if d > threshold {
                    weights[j] = -d;
                    any = true;
                } else {
                    weights[j] = 0.0;
                }
            }
            if !any {
                continue;
            }
            let (u, v) = first.image_coords(x, y);
            let ray = pixel_ray(camera, u, v);
            value += gaussian_visibility_adjoint(&ray.origin, &ray.dir, joints, &weights, &mut grad);
        }
    }
    (value, grad)
}
