//! The space-time objective: contour and detection data terms, the shape,
//! smoothness and joint-limit priors, and their analytic gradients.

mod contour;
mod detection;
mod image;
mod terms;
mod total;

pub use contour::{contour_view, tile_candidates, TILE};
pub use detection::{detection_view, HeatMap, HeatMapSet};
pub use image::{gaussian_blur, image_gradients, image_gradients_with, GradientImage, RgbImage};
pub use terms::{e_flat, e_flat_grad, e_pose_prior, e_shape_prior, e_sim, e_sim_grad, e_smooth_prior};
pub use total::{Energy, EnergyConfig, EnergyEval, EnergyTerms, Observations, Stage};

/// Image gradients below this magnitude count as flat.
pub const DELTA_LOW: f64 = 0.1;
/// Image gradient magnitudes are clamped to this value.
pub const DELTA_HIGH: f64 = 0.2;
/// Gaussian smoothing (pixels) applied to the Sobel response.
pub const SOBEL_SIGMA: f64 = 1.1;
