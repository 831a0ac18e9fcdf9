use nalgebra::Vector3;

use super::mesh::Mesh;
use super::registration::{Similarity, SkinningWeights};
use crate::error::{Error, Result};
use crate::scene::{ActorModel, Kinematics, PoseVector};

/// Each vertex becomes the weighted blend of its Gaussians' transforms.
pub fn skin_mesh(reference: &Mesh, weights: &SkinningWeights, transforms: &[Similarity]) -> Result<Mesh> {
    if weights.per_vertex.len() != reference.vertices.len() {
        return Err(Error::invalid("skinning weights do not match the mesh"));
    }
    let vertices = reference
        .vertices
        .iter()
        .zip(&weights.per_vertex)
        .map(|(x, ws)| ws.iter().fold(Vector3::zeros(), |acc, (q, w)| acc + transforms[*q].apply(x) * *w))
        .collect();
    Ok(Mesh {
        vertices,
        triangles: reference.triangles.clone(),
    })
}

/// Per-Gaussian transforms taking the rest-pose reference actor onto
/// `target` posed by `pose`: scale by the std-dev ratio about the reference
/// mean, move to the target's local mean, then apply the bone transform.
pub fn pose_similarities(reference: &ActorModel, target: &ActorModel, pose: &PoseVector) -> Result<Vec<Similarity>> {
    if reference.gaussians.len() != target.gaussians.len() {
        return Err(Error::invalid("reference and target differ in gaussian count"));
    }
    let kin = Kinematics::new(&target.skeleton, pose)?;
    let rest = reference.rest_means();
    Ok(reference
        .gaussians
        .iter()
        .zip(&target.gaussians)
        .zip(&rest)
        .map(|((r, t), mu_r)| {
            let bone = &kin.transforms[t.bone];
            let k = t.std_dev / r.std_dev;
            Similarity {
                scale: k,
                rot: bone.rot,
                trans: bone.apply(&t.mean_local) - bone.rot * mu_r * k,
            }
        })
        .collect())
}
