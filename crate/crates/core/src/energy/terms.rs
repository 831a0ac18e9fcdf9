//! Per-pixel contour terms and the quadratic priors.

/// Orientation similarity of model gradient `gb` and image gradient `gi`:
/// `-|gb||gi| cos(2θ)`, zero when either vanishes.
pub fn e_sim(gb: [f64; 2], gi: [f64; 2]) -> f64 {
    let (nb, ni) = (gb[0].hypot(gb[1]), gi[0].hypot(gi[1]));
    if nb == 0.0 || ni == 0.0 {
        return 0.0;
    }
    let dot = gb[0] * gi[0] + gb[1] * gi[1];
    nb * ni - 2.0 * dot * dot / (nb * ni)
}

/// Derivative of [`e_sim`] w.r.t. `gb`.
pub fn e_sim_grad(gb: [f64; 2], gi: [f64; 2]) -> [f64; 2] {
    let (nb, ni) = (gb[0].hypot(gb[1]), gi[0].hypot(gi[1]));
    if nb == 0.0 || ni == 0.0 {
        return [0.0; 2];
    }
    let dot = gb[0] * gi[0] + gb[1] * gi[1];
    let a = ni / nb + 2.0 * dot * dot / (nb * nb * nb * ni);
    let b = 4.0 * dot / (nb * ni);
    [a * gb[0] - b * gi[0], a * gb[1] - b * gi[1]]
}

/// Penalty for model contours where the image is flat:
/// `|gb| max(0, δ_low - |gi|)`.
pub fn e_flat(gb: [f64; 2], gi: [f64; 2], delta_low: f64) -> f64 {
    gb[0].hypot(gb[1]) * (delta_low - gi[0].hypot(gi[1])).max(0.0)
}

pub fn e_flat_grad(gb: [f64; 2], gi: [f64; 2], delta_low: f64) -> [f64; 2] {
    let nb = gb[0].hypot(gb[1]);
    let hinge = (delta_low - gi[0].hypot(gi[1])).max(0.0);
    if nb == 0.0 || hinge == 0.0 {
        return [0.0; 2];
    }
    [gb[0] / nb * hinge, gb[1] / nb * hinge]
}

/// `Σ_k max(0, |s_k| - bound_k)²` and its gradient.
pub fn e_shape_prior(s: &[f64], bounds: &[f64]) -> (f64, Vec<f64>) {
    let mut e = 0.0;
    let g = s
        .iter()
        .zip(bounds)
        .map(|(v, b)| {
            let over = v.abs() - b;
            if over > 0.0 {
                e += over * over;
                2.0 * over * v.signum()
            } else {
                0.0
            }
        })
        .collect();
    (e, g)
}

/// `Σ_t |p_{t-1} - 2 p_t + p_{t+1}|²` over interior frames and its
/// per-frame gradient.
pub fn e_smooth_prior(poses: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let n = poses.len();
    let dim = poses.first().map_or(0, |p| p.len());
    let mut grad = vec![vec![0.0; dim]; n];
    let mut e = 0.0;
    for t in 1..n.saturating_sub(1) {
        for k in 0..dim {
            let a = poses[t - 1][k] - 2.0 * poses[t][k] + poses[t + 1][k];
            e += a * a;
            grad[t - 1][k] += 2.0 * a;
            grad[t][k] -= 4.0 * a;
            grad[t + 1][k] += 2.0 * a;
        }
    }
    (e, grad)
}

/// Quadratic hinge outside `[min, max]` for every parameter.
pub fn e_pose_prior(pose: &[f64], limits: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let mut e = 0.0;
    let g = pose
        .iter()
        .zip(limits)
        .map(|(v, (lo, hi))| {
            if v > hi {
                e += (v - hi) * (v - hi);
                2.0 * (v - hi)
            } else if v < lo {
                e += (lo - v) * (lo - v);
                -2.0 * (lo - v)
            } else {
                0.0
            }
        })
        .collect();
    (e, g)
}
