use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::scene::{PosedGaussians, Skeleton};

/// Neighbourhood weights below this fraction of the largest are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-6;

/// Standard deviation of the helper Gaussians placed at joints when
/// registering a skeleton.
pub const JOINT_REGISTRATION_SIGMA: f64 = 0.10;

/// `x -> scale * rot * x + trans`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rot: Matrix3::identity(),
            trans: Vector3::zeros(),
        }
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rot * x * self.scale + self.trans
    }
}

/// Per-vertex sparse `(gaussian, weight)` lists, each summing to one.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SkinningWeights {
    pub per_vertex: Vec<Vec<(usize, f64)>>,
}

fn density(x: &Vector3<f64>, mean: &Vector3<f64>, sigma: f64, c: f64) -> f64 {
    c * (-(x - mean).norm_squared() / (2.0 * sigma * sigma)).exp()
}

/// Skinning weights proportional to each Gaussian's density at the vertex.
pub fn density_weights(vertices: &[Vector3<f64>], gaussians: &PosedGaussians) -> SkinningWeights {
    let mut per_vertex = Vec::with_capacity(vertices.len());
    let mut orphans = 0usize;
    for x in vertices {
        let raw: Vec<f64> = (0..gaussians.len())
            .map(|q| density(x, &gaussians.means[q], gaussians.std_devs[q], gaussians.densities[q]))
            .collect();
        let max = raw.iter().cloned().fold(0.0, f64::max);
        if !(max > 0.0) {
            orphans += 1;
            let nearest = (0..gaussians.len()).min_by(|&a, &b| {
                let da = (x - gaussians.means[a]).norm_squared();
                let db = (x - gaussians.means[b]).norm_squared();
                da.total_cmp(&db)
            });
            per_vertex.push(nearest.map(|q| vec![(q, 1.0)]).unwrap_or_default());
            continue;
        }
        let kept: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .filter(|(_, w)| **w >= WEIGHT_CUTOFF * max)
            .map(|(q, w)| (q, *w))
            .collect();
        let sum: f64 = kept.iter().map(|(_, w)| w).sum();
        per_vertex.push(kept.into_iter().map(|(q, w)| (q, w / sum)).collect());
    }
    if orphans > 0 {
        log::warn!("{orphans} vertices had zero density; bound to the nearest gaussian");
    }
    SkinningWeights { per_vertex }
}

/// Weighted least-squares similarity mapping `source` onto `target`.
pub fn procrustes_similarity(source: &[Vector3<f64>], target: &[Vector3<f64>], weights: &[f64]) -> Result<Similarity> {
    if source.len() != target.len() || source.len() != weights.len() {
        return Err(Error::invalid("procrustes inputs differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("procrustes weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    let degenerate = || Error::Degenerate { what: "point set".into() };
    if source.len() < 3 || !(total > 0.0) {
        return Err(degenerate());
    }
    let mut mx = Vector3::zeros();
    let mut my = Vector3::zeros();
    for ((x, y), w) in source.iter().zip(target).zip(weights) {
        mx += x * *w;
        my += y * *w;
    }
    mx /= total;
    my /= total;
    let mut cxy = Matrix3::zeros();
    let mut cxx = Matrix3::zeros();
    let mut cyy = Matrix3::zeros();
    for ((x, y), w) in source.iter().zip(target).zip(weights) {
        let (dx, dy) = (x - mx, y - my);
        cxy += dy * dx.transpose() * *w;
        cxx += dx * dx.transpose() * *w;
        cyy += dy * dy.transpose() * *w;
    }
    cxy /= total;
    cxx /= total;
    cyy /= total;
    for c in [&cxx, &cyy] {
        let mut ev: Vec<f64> = SymmetricEigen::new(*c).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        if !(ev[0] > 1e-24) || ev[1] <= 1e-10 * ev[0] {
            return Err(degenerate());
        }
    }
    let svd = cxy.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    // singular values come sorted descending, so the flip hits the smallest
    let rot = u * d * v_t;
    let var_x = cxx.trace();
    let scale = (Matrix3::from_diagonal(&svd.singular_values) * d).trace() / var_x;
    if !(scale > 0.0) {
        return Err(degenerate());
    }
    Ok(Similarity {
        scale,
        rot,
        trans: my - rot * mx * scale,
    })
}

fn neighbourhood(vertices: &[Vector3<f64>], mean: &Vector3<f64>, sigma: f64, c: f64) -> Vec<(usize, f64)> {
    let raw: Vec<f64> = vertices.iter().map(|x| density(x, mean, sigma, c)).collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    raw.into_iter()
        .enumerate()
        .filter(|(_, w)| max > 0.0 && *w >= WEIGHT_CUTOFF * max)
        .collect()
}

fn local_similarity(reference: &Mesh, instance: &Mesh, mean: &Vector3<f64>, sigma: f64, c: f64) -> Result<Similarity> {
    let nb = neighbourhood(&reference.vertices, mean, sigma, c);
    let src: Vec<_> = nb.iter().map(|(i, _)| reference.vertices[*i]).collect();
    let dst: Vec<_> = nb.iter().map(|(i, _)| instance.vertices[*i]).collect();
    let w: Vec<_> = nb.iter().map(|(_, w)| *w).collect();
    procrustes_similarity(&src, &dst, &w)
}

fn check_meshes(reference: &Mesh, instance: &Mesh) -> Result<()> {
    if !reference.same_topology(instance) {
        return Err(Error::invalid("instance mesh is not in vertex correspondence with the reference"));
    }
    Ok(())
}

/// Per-Gaussian similarity transforms from reference to instance.
pub fn gaussian_similarities(gaussians: &PosedGaussians, reference: &Mesh, instance: &Mesh) -> Result<Vec<Similarity>> {
    check_meshes(reference, instance)?;
    (0..gaussians.len())
        .map(|q| {
            local_similarity(
                reference,
                instance,
                &gaussians.means[q],
                gaussians.std_devs[q],
                gaussians.densities[q],
            )
            .map_err(|e| match e {
                Error::Degenerate { .. } => Error::Degenerate {
                    what: format!("gaussian {q}"),
                },
                e => e,
            })
        })
        .collect()
}

/// Transfers rest-pose reference Gaussians onto an instance mesh: means
/// move by each Gaussian's local similarity, std-devs scale with it.
pub fn register_instance(gaussians: &PosedGaussians, reference: &Mesh, instance: &Mesh) -> Result<PosedGaussians> {
    let sims = gaussian_similarities(gaussians, reference, instance)?;
    let mut out = gaussians.clone();
    out.jacobians = None;
    for (q, t) in sims.iter().enumerate() {
        out.means[q] = t.apply(&gaussians.means[q]);
        out.std_devs[q] = gaussians.std_devs[q] * t.scale;
    }
    Ok(out)
}

/// Registered joint positions and bone lengths of an instance. The root
/// length is the root joint's height above the floor plane y = 0.
pub fn register_skeleton(skeleton: &Skeleton, reference: &Mesh, instance: &Mesh) -> Result<(Vec<Vector3<f64>>, Vec<f64>)> {
    check_meshes(reference, instance)?;
    let rest = skeleton.rest_positions();
    let joints = rest
        .iter()
        .enumerate()
        .map(|(j, p)| {
            local_similarity(reference, instance, p, JOINT_REGISTRATION_SIGMA, 1.0)
                .map(|t| t.apply(p))
                .map_err(|e| match e {
                    Error::Degenerate { .. } => Error::Degenerate {
                        what: format!("joint '{}'", skeleton.joints()[j].name),
                    },
                    e => e,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let lengths = skeleton
        .joints()
        .iter()
        .enumerate()
        .map(|(j, joint)| match joint.parent {
            None => joints[j].y,
            Some(p) => (joints[j] - joints[p]).norm(),
        })
        .collect();
    Ok((joints, lengths))
}
