use nalgebra::{DVector, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sogfit::scene::{default_actor, pose_gaussians, PoseVector};
use sogfit::shape::*;
use sogfit::Exec;

fn rest(actor: &sogfit::scene::ActorModel) -> sogfit::scene::PosedGaussians {
    pose_gaussians(actor, &PoseVector::zeros(actor.skeleton.pose_dim())).unwrap()
}

#[test]
fn reference_registered_to_itself_is_identity() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let inst = register_actor(&actor, &mesh, &mesh).unwrap();
    let reference = ShapeInstance::from_model(&actor);
    let d = (inst.stack() - reference.stack()).amax();
    assert!(d < 1e-8, "max deviation {d}");
}

#[test]
fn uniform_scaling_scales_gaussians_and_bones() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let mut big = mesh.clone();
    for v in &mut big.vertices {
        *v *= 1.5;
    }
    let g = rest(&actor);
    let reg = register_instance(&g, &mesh, &big).unwrap();
    for q in 0..g.len() {
        assert!((reg.std_devs[q] - 1.5 * g.std_devs[q]).abs() < 1e-9);
        assert!((reg.means[q] - 1.5 * g.means[q]).norm() < 1e-9);
        assert_eq!(reg.densities[q], g.densities[q]);
    }
    let mut bigger = mesh.clone();
    for v in &mut bigger.vertices {
        *v *= 1.2;
    }
    let (_, b) = register_skeleton(&actor.skeleton, &mesh, &bigger).unwrap();
    for (bi, br) in b.iter().zip(actor.skeleton.bone_lengths()) {
        assert!((bi - 1.2 * br).abs() < 1e-6);
    }
}

#[test]
fn widened_torso_only_moves_torso_gaussians() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let wide = body_mesh(&BodyParams {
        chest: 1.15,
        waist: 1.15,
        hip: 1.15,
        ..Default::default()
    });
    let g = rest(&actor);
    let reg = register_instance(&g, &mesh, &wide).unwrap();
    let sk = &actor.skeleton;
    let spine = sk.joint_index("spine").unwrap();
    let distal = ["l_elbow", "l_wrist", "r_elbow", "r_wrist", "l_knee", "l_ankle", "r_knee", "r_ankle"].map(|n| sk.joint_index(n).unwrap());
    let mut torso_grew = 0;
    for (q, blob) in actor.gaussians.iter().enumerate() {
        if blob.bone == spine && reg.std_devs[q] > g.std_devs[q] * 1.02 {
            torso_grew += 1;
        }
        if distal.contains(&blob.bone) {
            assert!((reg.std_devs[q] - g.std_devs[q]).abs() < 1e-6);
            assert!((reg.means[q] - g.means[q]).norm() < 1e-6);
        }
    }
    assert!(torso_grew >= 10, "only {torso_grew} torso gaussians grew");
}

#[test]
fn lengthened_arms_leave_legs_alone() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let long = body_mesh(&BodyParams {
        arm_length: 1.2,
        ..Default::default()
    });
    let (_, b) = register_skeleton(&actor.skeleton, &mesh, &long).unwrap();
    let sk = &actor.skeleton;
    let r = sk.bone_lengths();
    for name in ["l_elbow", "l_wrist", "r_elbow", "r_wrist"] {
        let j = sk.joint_index(name).unwrap();
        assert!(b[j] > r[j] * 1.1, "{name}: {} vs {}", b[j], r[j]);
    }
    for name in ["l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle"] {
        let j = sk.joint_index(name).unwrap();
        assert!((b[j] - r[j]).abs() < 1e-3, "{name}");
    }
}

#[test]
fn two_instances_give_midpoint_and_difference_axis() {
    let actor = default_actor();
    let a = ShapeInstance::from_model(&actor);
    let mut b = a.clone();
    for s in &mut b.std_devs {
        *s *= 1.1;
    }
    b.bone_lengths[5] += 0.05;
    let space = build_shape_space(actor, &[a.clone(), b.clone()], 50, None).unwrap();
    assert_eq!(space.dim(), 1);
    let mid = (a.stack() + b.stack()) / 2.0;
    assert!((space.mean.clone() - mid).amax() < 1e-14);
    let diff = b.stack() - a.stack();
    let axis = diff.normalize();
    let col = space.basis.column(0);
    let dot = col.dot(&axis).abs();
    assert!((dot - 1.0).abs() < 1e-12, "{dot}");
}

#[test]
fn one_dominant_mode_captures_variance() {
    let actor = default_actor();
    let base = ShapeInstance::from_model(&actor).stack();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mode = DVector::from_fn(base.len(), |i, _| ((i * 7919) % 13) as f64 - 6.0).normalize();
    let inst: Vec<_> = (0..30)
        .map(|_| {
            let a: f64 = rng.random_range(-0.1..0.1);
            let noise = DVector::from_fn(base.len(), |_, _| rng.random_range(-1e-5..1e-5));
            let v = &base + &mode * a + noise;
            ShapeInstance::unstack(&v, 91, 16)
        })
        .collect();
    let space = build_shape_space(actor, &inst, 10, None).unwrap();
    let var: Vec<f64> = space.std_devs.iter().map(|s| s * s).collect();
    let total: f64 = var.iter().sum();
    assert!(var[0] / total >= 0.99);
}

#[test]
fn procedural_space_reconstructs_training_bodies() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let db = procedural_database(12, 0.06, 1);
    let space = build_from_meshes(&actor, &mesh, &db, 50, Exec::default()).unwrap();
    assert_eq!(space.dim(), 11);
    let gram = space.basis.transpose() * &space.basis;
    let eye = nalgebra::DMatrix::identity(11, 11);
    assert!((gram - eye).amax() < 1e-10);
    // full rank: every training sample reconstructs exactly
    for m in &db {
        let inst = register_actor(&actor, &mesh, m).unwrap();
        let s = space.project(&inst);
        let back = space.evaluate_stack(&s).unwrap();
        assert!((back - inst.stack()).amax() < 1e-8);
    }
    let zero = space.evaluate(&space.zero()).unwrap();
    assert!((zero.stack() - &space.mean).amax() < 1e-15);
}

#[test]
fn skinning_with_identity_and_rigid_transforms() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let g = rest(&actor);
    let w = density_weights(&mesh.vertices, &g);
    for ws in &w.per_vertex {
        let s: f64 = ws.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    let id = vec![Similarity::identity(); g.len()];
    assert_eq!(skin_mesh(&mesh, &w, &id).unwrap().vertices.len(), mesh.vertices.len());
    let out = skin_mesh(&mesh, &w, &id).unwrap();
    for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
        assert!((a - b).norm() < 1e-12);
    }
    let r = Rotation3::new(Vector3::new(0.2, -0.4, 0.9)).into_inner();
    let rigid = Similarity {
        scale: 1.0,
        rot: r,
        trans: Vector3::new(1.0, -2.0, 0.5),
    };
    let out = skin_mesh(&mesh, &w, &vec![rigid; g.len()]).unwrap();
    for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
        assert!((a - rigid.apply(b)).norm() < 1e-12);
    }
}

#[test]
fn pose_driven_skinning_matches_direct_blend() {
    let actor = default_actor();
    let mesh = body_mesh(&BodyParams::default());
    let w = density_weights(&mesh.vertices, &rest(&actor));
    let mut pose = PoseVector::zeros(actor.skeleton.pose_dim());
    let elbow = actor.skeleton.dof_offset(actor.skeleton.joint_index("l_elbow").unwrap());
    pose.0[elbow] = -1.0;
    let sims = pose_similarities(&actor, &actor, &pose).unwrap();
    let out = skin_mesh(&mesh, &w, &sims).unwrap();
    let v = 500;
    let direct = w.per_vertex[v]
        .iter()
        .fold(Vector3::zeros(), |acc, (q, wq)| acc + sims[*q].apply(&mesh.vertices[v]) * *wq);
    assert!((out.vertices[v] - direct).norm() < 1e-12);
    // a hand vertex follows the forearm rotation
    let tip = mesh.vertices.iter().enumerate().max_by(|a, b| a.1.x.total_cmp(&b.1.x)).unwrap().0;
    assert!(out.vertices[tip].x < mesh.vertices[tip].x - 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn procrustes_recovers_random_similarity(
        seed in any::<u64>(),
        scale in 0.2f64..5.0,
        w in prop::array::uniform3(-3.0f64..3.0),
        t in prop::array::uniform3(-10.0f64..10.0),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vector3<f64>> = (0..10)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let weights: Vec<f64> = (0..10).map(|_| rng.random_range(0.1..2.0)).collect();
        let rot = Rotation3::new(Vector3::from(w)).into_inner();
        let tr = Vector3::from(t);
        let y: Vec<_> = x.iter().map(|p| rot * p * scale + tr).collect();
        let sim = procrustes_similarity(&x, &y, &weights).unwrap();
        prop_assert!((sim.scale - scale).abs() < 1e-8);
        prop_assert!((sim.rot - rot).amax() < 1e-8);
        prop_assert!((sim.trans - tr).amax() < 1e-8);
    }

    #[test]
    fn skinning_commutes_with_translation(t in prop::array::uniform3(-2.0f64..2.0)) {
        let actor = default_actor();
        let mesh = body_mesh(&BodyParams::default());
        let w = density_weights(&mesh.vertices, &rest(&actor));
        let shift = Similarity { scale: 1.0, rot: nalgebra::Matrix3::identity(), trans: Vector3::from(t) };
        let out = skin_mesh(&mesh, &w, &vec![shift; actor.gaussians.len()]).unwrap();
        for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
            prop_assert!((a - b - Vector3::from(t)).norm() < 1e-12);
        }
    }
}
