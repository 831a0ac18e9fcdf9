mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use sogfit::appearance::{robust_color, view_color, view_colors, ColorCandidate};
use sogfit::energy::RgbImage;
use sogfit::evaluation::render_rgb;
use sogfit::raycast::gaussian_visibility;
use sogfit::raycast::pixel_ray;
use sogfit::scene::PosedGaussians;
use sogfit::Exec;

fn blob(means: &[[f64; 3]], sigma: f64, density: f64) -> PosedGaussians {
    PosedGaussians::from_world(
        means.iter().map(|m| Vector3::from(*m)).collect(),
        vec![sigma; means.len()],
        vec![density; means.len()],
    )
}

fn cand(source: usize, color: [f64; 3]) -> ColorCandidate {
    ColorCandidate {
        source,
        color,
        weight: 1.0,
    }
}

#[test]
fn uniform_image_gives_its_colour() {
    let cam = common::axis_camera(40, 30, 40.0);
    let g = blob(&[[0.0, 0.0, 3.0], [0.3, 0.1, 3.5]], 0.2, 8.0);
    let img = RgbImage::filled(40, 30, [0.9, 0.1, 0.1]);
    for c in view_colors(&cam, &img, &g, 0, Exec::Sequential).unwrap() {
        let c = c.unwrap().color;
        for k in 0..3 {
            assert!((c[k] - [0.9, 0.1, 0.1][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn fully_occluded_gaussian_has_no_candidate() {
    let cam = common::axis_camera(32, 24, 40.0);
    // a huge dense blob in front hides a small one straight behind it
    let g = PosedGaussians::from_world(
        vec![Vector3::new(0.0, 0.0, 3.0), Vector3::new(0.0, 0.0, 8.0)],
        vec![0.6, 0.05],
        vec![400.0, 2.0],
    );
    let img = RgbImage::filled(32, 24, [0.5; 3]);
    let v = view_colors(&cam, &img, &g, 0, Exec::Sequential).unwrap();
    assert!(v[0].is_some());
    assert!(v[1].is_none());
    // off-screen Gaussians are invisible too
    let side = blob(&[[30.0, 0.0, 3.0]], 0.1, 5.0);
    assert!(view_color(&cam, &img, &side, 0).unwrap().is_none());
}

#[test]
fn two_tone_image_matches_visibility_weighted_mean() {
    let cam = common::axis_camera(30, 20, 30.0);
    let g = blob(&[[0.1, 0.0, 3.0]], 0.3, 6.0);
    let mut img = RgbImage::filled(30, 20, [0.0, 0.0, 1.0]);
    for y in 0..20 {
        for x in 0..15 {
            img.data[y * 30 + x] = [1.0, 0.0, 0.0];
        }
    }
    // independent oracle: sum the visibility over the two halves
    let (mut left, mut total) = (0.0, 0.0);
    for y in 0..20 {
        for x in 0..30 {
            let r = pixel_ray(&cam, x as f64, y as f64);
            let v = gaussian_visibility(&r.origin, &r.dir, &g)[0];
            total += v;
            if x < 15 {
                left += v;
            }
        }
    }
    let (c, w) = view_color(&cam, &img, &g, 0).unwrap().unwrap();
    assert!((w - total).abs() <= 1e-12 * total);
    assert!((c[0] - left / total).abs() < 1e-12);
    assert!((c[2] - (total - left) / total).abs() < 1e-12);
    assert!(c[0] < 0.5, "blob sits right of centre, so blue dominates: {c:?}");
}

#[test]
fn minority_outliers_are_removed() {
    let gray = [0.5, 0.5, 0.5];
    let red = [1.0, 0.0, 0.0];
    let mut c: Vec<ColorCandidate> = (0..4).map(|s| cand(s, gray)).collect();
    c.push(cand(4, red));
    c.push(cand(5, red));
    assert_eq!(robust_color(&c), Some(gray));
}

#[test]
fn noisy_inliers_average_and_single_candidate_survives() {
    let c = vec![
        cand(0, [0.48, 0.5, 0.5]),
        cand(1, [0.52, 0.5, 0.5]),
        cand(2, [0.5, 0.49, 0.5]),
        cand(3, [0.5, 0.51, 0.5]),
        cand(4, [0.0, 1.0, 0.0]),
    ];
    let m = robust_color(&c).unwrap();
    for k in 0..3 {
        assert!((m[k] - 0.5).abs() < 0.02, "{m:?}");
    }
    assert_eq!(robust_color(&[cand(9, [0.1, 0.2, 0.3])]), Some([0.1, 0.2, 0.3]));
    assert_eq!(robust_color(&[]), None);
}

#[test]
fn rendered_colour_is_recovered_from_a_view() {
    let cam = common::axis_camera(48, 36, 50.0);
    let g = blob(&[[-0.4, 0.0, 3.0], [0.4, 0.0, 3.0]], 0.15, 30.0);
    let colors = [[0.8, 0.2, 0.1], [0.1, 0.3, 0.9]];
    let bg = RgbImage::filled(48, 36, [0.0; 3]);
    let img = render_rgb(&cam, &g, &colors, &bg, Exec::Sequential);
    let v = view_colors(&cam, &img, &g, 0, Exec::Sequential).unwrap();
    for q in 0..2 {
        let c = v[q].unwrap().color;
        // the black background bleeds in; hue is preserved
        let s: f64 = c.iter().sum();
        let t: f64 = colors[q].iter().sum();
        for k in 0..3 {
            assert!((c[k] / s - colors[q][k] / t).abs() < 0.02, "{q}: {c:?}");
        }
    }
}

#[test]
fn parallel_matches_sequential() {
    let cam = common::axis_camera(40, 30, 40.0);
    let mut rng = common::rng(4);
    let g = common::front_scene(&mut rng, 6);
    let img = sogfit::evaluation::textured_background(40, 30, 0.5, &mut rng);
    assert_eq!(
        view_colors(&cam, &img, &g, 3, Exec::Sequential).unwrap(),
        view_colors(&cam, &img, &g, 3, Exec::Parallel).unwrap()
    );
}

fn color() -> impl Strategy<Value = [f64; 3]> {
    [0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn result_ignores_input_order(colors in prop::collection::vec(color(), 1..12), seed in any::<u64>()) {
        let c: Vec<ColorCandidate> = colors.iter().enumerate().map(|(i, c)| cand(i, *c)).collect();
        let mut shuffled = c.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut common::rng(seed));
        prop_assert_eq!(robust_color(&c), robust_color(&shuffled));
    }

    #[test]
    fn result_lies_in_the_candidate_hull(colors in prop::collection::vec(color(), 1..12)) {
        let c: Vec<ColorCandidate> = colors.iter().enumerate().map(|(i, c)| cand(i, *c)).collect();
        let m = robust_color(&c).unwrap();
        for k in 0..3 {
            let lo = colors.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
            let hi = colors.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m[k] >= lo - 1e-12 && m[k] <= hi + 1e-12);
        }
    }

    #[test]
    fn clear_majority_wins_exactly(n_good in 3usize..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let truth = [0.2, 0.6, 0.4];
        let wrong = [rng.random_range(0.7..1.0), 0.0, rng.random_range(0.7..1.0)];
        let n_bad = (n_good - 1) / 2;
        let mut c: Vec<ColorCandidate> = (0..n_good).map(|i| cand(i, truth)).collect();
        c.extend((0..n_bad).map(|i| cand(n_good + i, wrong)));
        prop_assert_eq!(robust_color(&c), Some(truth));
    }
}
