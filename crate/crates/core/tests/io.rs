mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;
use sogfit::energy::{HeatMap, HeatMapSet, RgbImage};
use sogfit::evaluation::Mask;
use sogfit::io::{actor, cameras, fit, heatmaps, images, manifest, obj, poses, shape_file};
use sogfit::raycast::CameraModel;
use sogfit::shape::{body_mesh, default_shape_space, BodyParams};
use sogfit::{Error, Exec};
use tempfile::tempdir;

fn random_camera(rng: &mut rand_chacha::ChaCha8Rng, name: &str) -> CameraModel {
    let eye = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(0.5..2.5), rng.random_range(3.0..6.0));
    let target = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(0.5..1.2), rng.random_range(-0.3..0.3));
    CameraModel::look_at(name, eye, target, Vector3::y(), rng.random_range(50.0..900.0), 64, 48).unwrap()
}

fn rig(n: usize, seed: u64) -> Vec<CameraModel> {
    let mut rng = common::rng(seed);
    (0..n).map(|c| random_camera(&mut rng, &format!("cam{c}"))).collect()
}

#[test]
fn cameras_round_trip_exactly() {
    let cams = rig(4, 1);
    let text = cameras::cameras_to_string(&cams);
    let back = cameras::parse_cameras(&text, "rig.toml").unwrap();
    assert_eq!(back, cams);
    let dir = tempdir().unwrap();
    let p = dir.path().join("rig.toml");
    cameras::save_cameras(&cams, &p).unwrap();
    assert_eq!(cameras::load_cameras(&p).unwrap(), cams);
}

#[test]
fn malformed_camera_matrix_reports_line() {
    let text = cameras::cameras_to_string(&rig(2, 2));
    // the second camera's intrinsic matrix loses a row
    let mut seen = 0;
    let mut bad_line = 0;
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if l.starts_with("K = ") {
                seen += 1;
                if seen == 2 {
                    bad_line = i + 1;
                    return "K = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]".to_string();
                }
            }
            l.to_string()
        })
        .collect();
    let broken = broken.join("\n");
    assert!(bad_line > 0, "{text}");
    match cameras::parse_cameras(&broken, "rig.toml") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, bad_line),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn poses_round_trip_exactly() {
    let mut rng = common::rng(3);
    let seq: Vec<Vec<f64>> = (0..5).map(|_| (0..43).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let text = poses::poses_to_string(&seq);
    assert_eq!(poses::parse_poses(&text, 43, "p.csv").unwrap(), seq);
}

#[test]
fn pose_csv_with_wrong_column_count_is_rejected() {
    let seq = vec![vec![0.5; 43]; 2];
    let mut text = poses::poses_to_string(&seq);
    text.push_str("2,1.0,2.0\n");
    match poses::parse_poses(&text, 43, "p.csv") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        poses::parse_poses(&poses::poses_to_string(&seq), 42, "p.csv"),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn obj_export_preserves_counts() {
    let mesh = body_mesh(&BodyParams::default());
    let text = obj::mesh_to_obj(&mesh);
    let back = obj::parse_obj(&text, "m.obj").unwrap();
    assert_eq!(back.vertices.len(), mesh.vertices.len());
    assert_eq!(back.triangles, mesh.triangles);
    for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
        assert!((a - b).norm() <= 1e-12);
    }
}

#[test]
fn obj_polygons_and_negative_indices() {
    let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf -4 -3 -2\n";
    let m = obj::parse_obj(text, "q.obj").unwrap();
    assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    assert!(matches!(
        obj::parse_obj("v 0 0 0\nf 1 2 3\n", "bad.obj"),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn shape_space_round_trip_is_byte_exact() {
    let space = default_shape_space(10, 4, Exec::Sequential).unwrap();
    let bytes = shape_file::shape_space_bytes(&space);
    let back = shape_file::parse_shape_space(&bytes, "s.sogshape").unwrap();
    assert_eq!(back.mean, space.mean);
    assert_eq!(back.basis, space.basis);
    assert_eq!(back.bounds, space.bounds);
    assert_eq!(back.std_devs, space.std_devs);
    assert_eq!(shape_file::shape_space_bytes(&back), bytes);

    let dir = tempdir().unwrap();
    let p = dir.path().join("s.sogshape");
    shape_file::save_shape_space(&space, &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), bytes);
}

#[test]
fn shape_space_version_and_truncation_are_typed_errors() {
    let space = default_shape_space(6, 4, Exec::Sequential).unwrap();
    let bytes = shape_file::shape_space_bytes(&space);
    let mut wrong = bytes.clone();
    wrong[8] = wrong[8].wrapping_add(1);
    assert!(matches!(shape_file::parse_shape_space(&wrong, "s"), Err(Error::Version { .. })));
    for cut in [0, 7, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(shape_file::parse_shape_space(&bytes[..cut], "s").is_err());
    }
    assert!(matches!(
        shape_file::load_shape_space("/nonexistent/s.sogshape"),
        Err(Error::MissingInput(_))
    ));
}

#[test]
fn actor_file_round_trip() {
    let space = default_shape_space(6, 4, Exec::Sequential).unwrap();
    let model = space.model(&space.zero()).unwrap();
    let text = actor::actor_to_string(&model);
    let back = actor::parse_actor(&text, "a.toml").unwrap().model;
    assert_eq!(actor::actor_to_string(&back), text);
    for (a, b) in back.gaussians.iter().zip(&model.gaussians) {
        assert!((a.mean_local - b.mean_local).norm() <= 1e-12);
        assert_eq!(a.std_dev, b.std_dev);
    }
}

fn sample_heat(cams: usize, frames: usize, joints: usize) -> HeatMapSet {
    let mut rng = common::rng(8);
    let maps = (0..cams)
        .map(|_| {
            (0..frames)
                .map(|_| {
                    (0..joints)
                        .map(|j| {
                            (j % 3 != 1).then(|| {
                                let mut m = HeatMap::zeros(7, 5, 4.0);
                                for v in &mut m.data {
                                    // exactly representable in f32
                                    *v = (rng.random_range(0..=1024) as f64) / 1024.0;
                                }
                                m
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    HeatMapSet { maps }
}

#[test]
fn heatmaps_round_trip() {
    let set = sample_heat(2, 3, 4);
    let dir = tempdir().unwrap();
    let index = heatmaps::save_heatmaps(&set, dir.path().join("heat")).unwrap();
    assert_eq!(heatmaps::load_heatmaps(&index).unwrap(), set);
}

#[test]
fn heatmap_values_outside_unit_range_are_rejected() {
    let mut set = sample_heat(1, 1, 1);
    set.maps[0][0][0].as_mut().unwrap().data[3] = 1.5;
    let dir = tempdir().unwrap();
    let index = heatmaps::save_heatmaps(&set, dir.path()).unwrap();
    assert!(matches!(heatmaps::load_heatmaps(&index), Err(Error::Parse { .. })));
}

#[test]
fn pfm_and_pgm_round_trip() {
    let dir = tempdir().unwrap();
    let fm = images::FloatMap {
        width: 3,
        height: 2,
        channels: 3,
        data: (0..18).map(|v| v as f32 * 0.25 - 1.0).collect(),
    };
    let p = dir.path().join("m.pfm");
    images::save_pfm(&fm, &p).unwrap();
    assert_eq!(images::load_pfm(&p).unwrap(), fm);
    assert_eq!(std::fs::read(&p).unwrap(), images::pfm_bytes(&fm));

    let mask = Mask {
        width: 5,
        height: 3,
        data: (0..15).map(|k| k % 3 == 0).collect(),
    };
    let p = dir.path().join("m.pgm");
    images::save_mask_pgm(&mask, &p).unwrap();
    assert_eq!(images::load_mask_pgm(&p).unwrap(), mask);
}

#[test]
fn png_round_trip_within_quantization() {
    let dir = tempdir().unwrap();
    let mut rng = common::rng(5);
    let img = RgbImage {
        width: 6,
        height: 4,
        data: (0..24).map(|_| [rng.random(), rng.random(), rng.random()]).collect(),
    };
    let p = dir.path().join("i.png");
    images::save_rgb_png(&img, &p).unwrap();
    let back = images::load_rgb(&p).unwrap();
    assert_eq!((back.width, back.height), (6, 4));
    for (a, b) in back.data.iter().zip(&img.data) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 0.5 / 255.0 + 1e-9);
        }
    }
    assert!(matches!(
        images::load_rgb(dir.path().join("none.png")),
        Err(Error::MissingInput(_))
    ));
}

/// Writes a project with `cams` cameras and `frames` blank images.
fn write_project(root: &std::path::Path, cams: usize, frames: usize) -> manifest::ProjectManifest {
    let rig = rig(cams, 11);
    cameras::save_cameras(&rig, root.join("cameras.toml")).unwrap();
    let blank = RgbImage::filled(4, 3, [0.2, 0.4, 0.6]);
    let mut names = Vec::new();
    for c in 0..cams {
        let mut per = Vec::new();
        for t in 0..frames {
            let name = format!("img/c{c}/{t:03}.png");
            images::save_rgb_png(&blank, root.join(&name)).unwrap();
            per.push(name);
        }
        names.push(per);
    }
    let m = manifest::ProjectManifest {
        path: root.join("project.toml"),
        cameras_file: "cameras.toml".into(),
        cameras: rig,
        frames,
        images: names,
        heatmaps: None,
        output: "out".into(),
    };
    manifest::save_manifest(&m, &m.path).unwrap();
    m
}

#[test]
fn minimal_manifest_loads() {
    let dir = tempdir().unwrap();
    let m = write_project(dir.path(), 1, 1);
    let back = manifest::load_manifest(&m.path).unwrap();
    assert_eq!(back.cameras.len(), 1);
    assert_eq!(back.frames, 1);
    assert_eq!(back.image_path(0, 0), dir.path().join("img/c0/000.png"));
    assert_eq!(back.output_dir(), dir.path().join("out"));
}

#[test]
fn large_manifest_round_trips() {
    let dir = tempdir().unwrap();
    let m = write_project(dir.path(), 6, 40);
    let back = manifest::load_manifest(&m.path).unwrap();
    assert_eq!(back, m);
    assert_eq!(manifest::manifest_to_string(&back), std::fs::read_to_string(&m.path).unwrap());
}

#[test]
fn manifest_with_absent_image_names_the_path() {
    let dir = tempdir().unwrap();
    let m = write_project(dir.path(), 2, 3);
    let gone = dir.path().join("img/c1/002.png");
    std::fs::remove_file(&gone).unwrap();
    match manifest::load_manifest(&m.path) {
        Err(Error::MissingInput(msg)) => assert!(msg.contains("img/c1/002.png"), "{msg}"),
        other => panic!("expected a missing-input error, got {other:?}"),
    }
}

#[test]
fn manifest_with_inconsistent_frames_reports_line() {
    let dir = tempdir().unwrap();
    let m = write_project(dir.path(), 2, 3);
    let text = std::fs::read_to_string(&m.path).unwrap();
    let text = text.replacen(", \"img/c1/002.png\"", "", 1);
    match manifest::parse_manifest(&text, &m.path) {
        Err(Error::Parse { line, msg, .. }) => {
            assert!(line > 1);
            assert!(msg.contains("cam1"), "{msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn fit_file_round_trip_and_version_check() {
    let dir = tempdir().unwrap();
    let f = fit::FitFile::new(
        "both",
        "../s.sogshape".into(),
        "poses.csv".into(),
        "model.toml".into(),
        vec![0.25, -1.5],
    );
    let p = dir.path().join("fit.toml");
    fit::save_fit(&f, &p).unwrap();
    let rec = fit::load_fit(&p).unwrap();
    assert_eq!(rec.file, f);
    assert_eq!(rec.poses_path(), dir.path().join("poses.csv"));
    let text = std::fs::read_to_string(&p).unwrap().replace("version = 1", "version = 7");
    std::fs::write(&p, text).unwrap();
    assert!(matches!(fit::load_fit(&p), Err(Error::Version { found: 7, .. })));
    assert!(matches!(fit::load_fit(dir.path().join("none.toml")), Err(Error::MissingInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pose_csv_round_trips_any_finite_values(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 43), 1..4)
    ) {
        let text = poses::poses_to_string(&rows);
        prop_assert_eq!(poses::parse_poses(&text, 43, "p.csv").unwrap(), rows);
    }

    #[test]
    fn loaders_never_panic_on_garbage(text in "[ -~\n]{0,200}") {
        let _ = poses::parse_poses(&text, 43, "p.csv");
        let _ = obj::parse_obj(&text, "m.obj");
        let _ = cameras::parse_cameras(&text, "c.toml");
        let _ = actor::parse_actor(&text, "a.toml");
        let _ = shape_file::parse_shape_space(text.as_bytes(), "s");
    }
}
