//! Statistical shape space over Gaussian parameters and bone lengths,
//! registration of the reference actor to body meshes, and volumetric
//! skinning of the reference surface.

mod body;
mod mesh;
mod pca;
mod registration;
mod skinning;

pub use body::{body_height, body_joints, body_mesh, BodyParams, JOINT_NAMES};
pub use mesh::Mesh;
pub use pca::{build_shape_space, evaluate_shape, ShapeInstance, ShapeSpace, DEFAULT_SHAPE_DIM, MIN_STD_DEV};
pub use registration::{
    density_weights, gaussian_similarities, procrustes_similarity, register_instance, register_skeleton, Similarity, SkinningWeights,
    JOINT_REGISTRATION_SIGMA, WEIGHT_CUTOFF,
};
pub use skinning::{pose_similarities, skin_mesh};

use crate::error::Result;
use crate::scene::{pose_gaussians, ActorModel, PoseVector};

/// Registers the rest-pose `reference` actor to one instance mesh.
pub fn register_actor(reference: &ActorModel, reference_mesh: &Mesh, instance: &Mesh) -> Result<ShapeInstance> {
    let rest = pose_gaussians(reference, &PoseVector::zeros(reference.skeleton.pose_dim()))?;
    let world = register_instance(&rest, reference_mesh, instance)?;
    let (_, lengths) = register_skeleton(&reference.skeleton, reference_mesh, instance)?;
    let skeleton = reference.skeleton.with_bone_lengths(lengths.clone())?;
    let joints = skeleton.rest_positions();
    Ok(ShapeInstance {
        means_local: world
            .means
            .iter()
            .zip(&reference.gaussians)
            .map(|(m, g)| m - joints[g.bone])
            .collect(),
        std_devs: world.std_devs,
        densities: world.densities,
        bone_lengths: lengths,
    })
}

/// Registers every instance and builds the PCA model.
pub fn build_from_meshes(
    reference: &ActorModel,
    reference_mesh: &Mesh,
    instances: &[Mesh],
    dim: usize,
    exec: crate::Exec,
) -> Result<ShapeSpace> {
    let registered = exec
        .map(instances.len(), |i| register_actor(reference, reference_mesh, &instances[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    build_shape_space(reference.clone(), &registered, dim, Some(reference_mesh.clone()))
}

/// Procedural training set: `count` bodies drawn from `seed`.
pub fn procedural_database(count: usize, spread: f64, seed: u64) -> Vec<Mesh> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| body_mesh(&BodyParams::sample(&mut rng, spread))).collect()
}

/// Shape space from the procedural generator around the default actor.
pub fn default_shape_space(count: usize, seed: u64, exec: crate::Exec) -> Result<ShapeSpace> {
    let reference = crate::scene::default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let db = procedural_database(count, 0.06, seed);
    build_from_meshes(&reference, &mesh, &db, DEFAULT_SHAPE_DIM, exec)
}

/// The shape space's reference surface deformed onto `model` in `pose`.
pub fn skin_actor(space: &ShapeSpace, model: &ActorModel, pose: &PoseVector) -> Result<Mesh> {
    let mesh = space
        .reference_mesh
        .as_ref()
        .ok_or_else(|| crate::Error::MissingInput("shape space has no reference mesh".into()))?;
    let rest = pose_gaussians(&space.template, &PoseVector::zeros(space.template.skeleton.pose_dim()))?;
    let weights = density_weights(&mesh.vertices, &rest);
    let transforms = pose_similarities(&space.template, model, pose)?;
    skin_mesh(mesh, &weights, &transforms)
}
