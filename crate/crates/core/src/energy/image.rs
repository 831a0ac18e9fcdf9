//! Image-side preprocessing: smoothed, channel-summed Sobel gradients.

/// Linear RGB image, values nominally in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}

/// Per-pixel 2D image gradient, row-major; `[d/du, d/dv]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientImage {
    pub width: usize,
    pub height: usize,
    pub grad: Vec<[f64; 2]>,
}

impl GradientImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            grad: vec![[0.0; 2]; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        self.grad[y * self.width + x]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.grad.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max)
    }

    /// Rescales every vector longer than `limit` to length `limit`.
    pub fn clamp_magnitude(&mut self, limit: f64) {
        for g in &mut self.grad {
            let m = g[0].hypot(g[1]);
            if m > limit {
                g[0] *= limit / m;
                g[1] *= limit / m;
            }
        }
    }
}

/// Edge-duplicating reflection of an out-of-range index.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).floor() as isize;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn convolve_separable(src: &[f64], w: usize, h: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kx
                .iter()
                .enumerate()
                .map(|(i, k)| k * src[y * w + reflect(x as isize + i as isize - rx, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = ky
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[reflect(y as isize + i as isize - ry, h) * w + x])
                .sum();
        }
    }
    out
}

/// Gaussian smoothing (truncated at 3σ, reflected boundary) of a scalar plane.
pub fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let k = gaussian_kernel(sigma);
    convolve_separable(src, w, h, &k, &k)
}

/// Standard 3×3 Sobel responses of every channel, smoothed with a Gaussian
/// of `sigma` pixels, summed over channels and clamped to `clamp`.
pub fn image_gradients_with(image: &RgbImage, sigma: f64, clamp: f64) -> GradientImage {
    let (w, h) = (image.width, image.height);
    let mut out = GradientImage::zeros(w, h);
    if w == 0 || h == 0 {
        return out;
    }
    for c in 0..3 {
        let plane: Vec<f64> = image.data.iter().map(|p| p[c]).collect();
        // Sobel = [1 2 1]ᵀ ⊗ [-1 0 1]
        let gx = convolve_separable(&plane, w, h, &[-1.0, 0.0, 1.0], &[1.0, 2.0, 1.0]);
        let gy = convolve_separable(&plane, w, h, &[1.0, 2.0, 1.0], &[-1.0, 0.0, 1.0]);
        let gx = gaussian_blur(&gx, w, h, sigma);
        let gy = gaussian_blur(&gy, w, h, sigma);
        for i in 0..w * h {
            out.grad[i][0] += gx[i];
            out.grad[i][1] += gy[i];
        }
    }
    out.clamp_magnitude(clamp);
    out
}

/// [`image_gradients_with`] using σ = 1.1 px and a clamp of 0.2.
pub fn image_gradients(image: &RgbImage) -> GradientImage {
    image_gradients_with(image, super::SOBEL_SIGMA, super::DELTA_HIGH)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_gradient() {
        let g = image_gradients(&RgbImage::filled(12, 9, [0.3, 0.5, 0.9]));
        assert!(g.grad.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
    }

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(1.1);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
