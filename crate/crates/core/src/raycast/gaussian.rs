//! Visibility of individual Gaussians along a ray:
//! `V_q = ∫ g_q(t) exp(-Σ_i ∫_{-∞}^t g_i) dt`.
//!
//! The inner integrals are closed-form error functions. The outer one uses
//! composite 4-point Gauss-Legendre rules between breakpoints placed at
//! fixed multiples of every contributing Gaussian's std-dev around its
//! peak. Integrating from -∞ makes `Σ_q V_q = 1 - B` exact in the limit.

use nalgebra::Vector3;

use super::visibility::{GaussianGrad, CULL_DENSITY};
use crate::scene::PosedGaussians;

const BREAKPOINTS: [f64; 13] = [-6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
const GL_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_W: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];
/// Beyond this many std-devs a Gaussian's partial absorbance is saturated.
const FAR: f64 = 9.0;
const SQRT_PI_2: f64 = 1.253_314_137_315_500_3;

#[derive(Clone, Copy, Debug)]
struct Active {
    q: usize,
    m: f64,
    sigma: f64,
    c_bar: f64,
    falloff: f64,
    perp: Vector3<f64>,
}

fn actives(origin: &Vector3<f64>, dir: &Vector3<f64>, g: &PosedGaussians) -> Vec<Active> {
    let mut out = Vec::new();
    for q in 0..g.len() {
        let sigma = g.std_devs[q];
        let delta = g.means[q] - origin;
        let m = delta.dot(dir);
        let perp = delta - dir * m;
        let falloff = (-perp.norm_squared() / (2.0 * sigma * sigma)).exp();
        let c_bar = g.densities[q] * falloff;
        if c_bar >= CULL_DENSITY {
            out.push(Active {
                q,
                m,
                sigma,
                c_bar,
                falloff,
                perp,
            });
        }
    }
    out
}

/// Sorted breakpoints with their owner (index into actives) and multiple.
fn breakpoints(act: &[Active]) -> Vec<(f64, usize, f64)> {
    let mut b: Vec<(f64, usize, f64)> = act
        .iter()
        .enumerate()
        .flat_map(|(i, a)| BREAKPOINTS.iter().map(move |&k| (a.m + a.sigma * k, i, k)))
        .collect();
    b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.total_cmp(&y.2)));
    b
}

/// Per-node quantities shared by the forward and backward passes.
struct Node {
    t: f64,
    /// `g_i(t)` for every active Gaussian.
    dens: Vec<f64>,
    /// Partial absorbance `∫_{-∞}^t g_i`.
    absorb: Vec<f64>,
}

impl Node {
    fn new(act: &[Active]) -> Self {
        Self {
            t: 0.0,
            dens: vec![0.0; act.len()],
            absorb: vec![0.0; act.len()],
        }
    }

    /// Fills the node at `t` and returns the transmittance.
    fn eval(&mut self, act: &[Active], t: f64) -> f64 {
        self.t = t;
        let mut depth = 0.0;
        for (i, a) in act.iter().enumerate() {
            let z = (t - a.m) / a.sigma;
            let full = 2.0 * a.c_bar * a.sigma * SQRT_PI_2;
            let (g, ab) = if z < -FAR {
                (0.0, 0.0)
            } else if z > FAR {
                (0.0, full)
            } else {
                (
                    a.c_bar * (-0.5 * z * z).exp(),
                    0.5 * full * (1.0 + libm::erf(z * std::f64::consts::FRAC_1_SQRT_2)),
                )
            };
            self.dens[i] = g;
            self.absorb[i] = ab;
            depth += ab;
        }
        (-depth).exp()
    }
}

/// `V_q` for every Gaussian (zero for culled ones).
pub fn gaussian_visibility(origin: &Vector3<f64>, dir: &Vector3<f64>, g: &PosedGaussians) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let act = actives(origin, dir, g);
    if act.is_empty() {
        return out;
    }
    let bp = breakpoints(&act);
    let mut node = Node::new(&act);
    for w in bp.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        if !(b > a) {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for k in 0..4 {
            let tr = node.eval(&act, mid + half * GL_X[k]);
            let wt = half * GL_W[k] * tr;
            for (i, ac) in act.iter().enumerate() {
                out[ac.q] += wt * node.dens[i];
            }
        }
    }
    out
}

/// Visibility of a single Gaussian `q`.
pub fn gaussian_visibility_of(origin: &Vector3<f64>, dir: &Vector3<f64>, g: &PosedGaussians, q: usize) -> f64 {
    gaussian_visibility(origin, dir, g)[q]
}

/// Returns `Σ_q weights[q] V_q` and accumulates its gradient w.r.t. every
/// Gaussian's mean, std-dev and density into `out`. The gradient is exact
/// for the discrete quadrature, node movement included.
pub fn gaussian_visibility_adjoint(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    g: &PosedGaussians,
    weights: &[f64],
    out: &mut GaussianGrad,
) -> f64 {
    let act = actives(origin, dir, g);
    if act.is_empty() || act.iter().all(|a| weights[a.q] == 0.0) {
        return 0.0;
    }
    let n = act.len();
    let bp = breakpoints(&act);
    let mut node = Node::new(&act);
    let mut value = 0.0;
    // gradients w.r.t. the 1D parameters (peak position, std-dev, peak density)
    let mut dm = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let mut dc = vec![0.0; n];
    for w in bp.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        if !(b > a) {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut da = 0.0;
        let mut db = 0.0;
        for k in 0..4 {
            let t = mid + half * GL_X[k];
            let tr = node.eval(&act, t);
            let mut wsum = 0.0;
            let mut wslope = 0.0;
            let mut gsum = 0.0;
            for (i, ac) in act.iter().enumerate() {
                let gi = node.dens[i];
                let wq = weights[ac.q];
                wsum += wq * gi;
                wslope -= wq * gi * (t - ac.m) / (ac.sigma * ac.sigma);
                gsum += gi;
            }
            let h = wsum * tr;
            let wt = half * GL_W[k];
            value += wt * h;
            // integrand derivatives at a fixed node
            for (i, ac) in act.iter().enumerate() {
                let gi = node.dens[i];
                let wq = weights[ac.q];
                let r = t - ac.m;
                let s2 = ac.sigma * ac.sigma;
                let ai = node.absorb[i];
                dm[i] += wt * tr * gi * (wq * r / s2 + wsum);
                ds[i] += wt * tr * (wq * gi * r * r / (s2 * ac.sigma) - wsum * (ai / ac.sigma - r / ac.sigma * gi));
                if ac.c_bar > 0.0 {
                    dc[i] += wt * tr * (wq * gi / ac.c_bar - wsum * ai / ac.c_bar);
                }
            }
            // node movement with the interval ends
            let dh = (wslope - wsum * gsum) * tr;
            da += GL_W[k] * (-0.5 * h + half * dh * 0.5 * (1.0 - GL_X[k]));
            db += GL_W[k] * (0.5 * h + half * dh * 0.5 * (1.0 + GL_X[k]));
        }
        let (ia, ka) = (w[0].1, w[0].2);
        let (ib, kb) = (w[1].1, w[1].2);
        dm[ia] += da;
        ds[ia] += da * ka;
        dm[ib] += db;
        ds[ib] += db * kb;
    }
    for (i, ac) in act.iter().enumerate() {
        let s2 = ac.sigma * ac.sigma;
        let d2 = ac.perp.norm_squared();
        // c̄ = c exp(-|Δ⊥|²/2σ²), m = Δ·n
        out.mean[ac.q] += dir * dm[i] - ac.perp * (dc[i] * ac.c_bar / s2);
        out.std_dev[ac.q] += ds[i] + dc[i] * ac.c_bar * d2 / (s2 * ac.sigma);
        out.density[ac.q] += dc[i] * ac.falloff;
    }
    value
}
