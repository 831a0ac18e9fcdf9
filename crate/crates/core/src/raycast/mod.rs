//! Closed-form image formation for calibrated pinhole cameras: background
//! visibility, its image gradient, per-Gaussian visibility and the
//! derivatives of all three w.r.t. the Gaussian parameters.

mod camera;
mod gaussian;
mod visibility;

pub use camera::{pixel_ray, CameraModel, Ray};
pub use gaussian::{gaussian_visibility, gaussian_visibility_adjoint, gaussian_visibility_of};
pub use visibility::{
    background_visibility, background_visibility_counted, background_visibility_gradient, project_gaussian, render_visibility,
    GaussianGrad, RayGaussian1D, RayTerms, VisibilityImage, CULL_DENSITY, SQRT_2PI,
};
