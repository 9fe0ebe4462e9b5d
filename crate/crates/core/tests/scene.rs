use nalgebra::{Point3, Vector3};
use poseval::pnp::CameraModel;
use poseval::rotation::random_rotation;
use poseval::scene::{
    occlusion_rates, render_depth, sample_scene, top_view_camera, BinBox, SceneError, SceneSpec,
};
use poseval::{shapes, ObjectModel, Pose, ProperSymmetryGroup, TriangleMesh};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn brick() -> ObjectModel {
    ObjectModel::new(shapes::cuboid(0.02, 0.04, 0.08), ProperSymmetryGroup::cyclic(2).unwrap()).unwrap()
}

/// Flat square of side `s` in the object xy-plane.
fn square(s: f64) -> ObjectModel {
    let h = s / 2.0;
    let mesh = TriangleMesh::new(
        vec![
            Point3::new(-h, -h, 0.0),
            Point3::new(h, -h, 0.0),
            Point3::new(h, h, 0.0),
            Point3::new(-h, h, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    ObjectModel::new(mesh, ProperSymmetryGroup::trivial()).unwrap()
}

fn front_camera() -> CameraModel {
    CameraModel::from_focal(500.0, 319.5, 239.5, Pose::identity()).unwrap()
}

fn at(x: f64, y: f64, z: f64) -> Pose {
    Pose::from_translation(Vector3::new(x, y, z))
}

fn spec(n: usize, seed: u64, obj: &ObjectModel) -> SceneSpec {
    SceneSpec {
        instance_count: n,
        bin: BinBox::for_instances(obj.diameter(), n),
        seed,
    }
}

#[test]
fn single_instance_lies_inside_bin() {
    let obj = brick();
    let s = spec(1, 3, &obj);
    let poses = sample_scene(&s, &obj).unwrap();
    assert_eq!(poses.len(), 1);
    let t = poses[0].translation();
    for k in 0..3 {
        assert!(t[k] >= s.bin.min[k] && t[k] <= s.bin.max[k]);
    }
}

#[test]
fn sampling_is_deterministic_in_seed() {
    let obj = brick();
    assert_eq!(sample_scene(&spec(15, 7, &obj), &obj).unwrap(), sample_scene(&spec(15, 7, &obj), &obj).unwrap());
    assert_ne!(sample_scene(&spec(15, 7, &obj), &obj).unwrap(), sample_scene(&spec(15, 8, &obj), &obj).unwrap());
}

#[test]
fn sampled_spheres_are_separated_and_inside_walls() {
    let obj = brick();
    let r = obj.diameter() / 2.0;
    for seed in 0..100 {
        let s = spec(15, seed, &obj);
        let poses = sample_scene(&s, &obj).unwrap();
        for (i, p) in poses.iter().enumerate() {
            let t = p.translation();
            for k in 0..3 {
                assert!(t[k] - r >= s.bin.min[k] - 1e-12 && t[k] + r <= s.bin.max[k] + 1e-12);
            }
            for q in &poses[i + 1..] {
                assert!((q.translation() - t).norm() >= obj.diameter());
            }
        }
    }
}

#[test]
fn impossible_scenes_are_errors() {
    let obj = brick();
    let d = obj.diameter();
    let tiny = BinBox::new([0.0; 3], [0.5 * d, d, d]).unwrap();
    let s = SceneSpec { instance_count: 1, bin: tiny, seed: 0 };
    assert!(matches!(sample_scene(&s, &obj), Err(SceneError::BinTooSmall { .. })));
    // Room for exactly one sphere.
    let snug = BinBox::new([0.0; 3], [1.5 * d, 1.5 * d, 1.5 * d]).unwrap();
    let s = SceneSpec { instance_count: 2, bin: snug, seed: 0 };
    assert_eq!(sample_scene(&s, &obj), Err(SceneError::PlacementFailed { placed: 1, requested: 2 }));
    assert!(BinBox::new([0.0; 3], [1.0, -1.0, 1.0]).is_err());
}

#[test]
fn nearer_coplanar_triangle_wins_the_overlap() {
    // Two parallel squares, the second nearer and shifted right.
    let obj = square(0.2);
    let cam = front_camera();
    let poses = [at(0.0, 0.0, 2.0), at(0.05, 0.0, 1.9)];
    let img = render_depth(&poses, &obj, &cam, 640, 480).unwrap();
    let (cx, cy) = (320, 240);
    assert_eq!(img.id_at(cx, cy), Some(1));
    assert!((img.depth_at(cx, cy).unwrap() - 1.9).abs() < 1e-12);
    // Left edge of the far square is not covered by the near one.
    assert_eq!(img.id_at(cx - 20, cy), Some(0));
    assert!((img.depth_at(cx - 20, cy).unwrap() - 2.0).abs() < 1e-12);
    // Equal depth: the lower id wins.
    let tie = render_depth(&[at(0.01, 0.0, 2.0), at(0.0, 0.0, 2.0)], &obj, &cam, 640, 480).unwrap();
    assert_eq!(tie.id_at(cx, cy), Some(0));
}

#[test]
fn sphere_pixel_count_matches_projected_disk() {
    let r = 0.1;
    let obj = ObjectModel::new(shapes::icosphere(r, 4), ProperSymmetryGroup::spherical()).unwrap();
    let cam = front_camera();
    for depth in [0.8, 1.0, 1.5] {
        let img = render_depth(&[at(0.0, 0.0, depth)], &obj, &cam, 640, 480).unwrap();
        // The tangent cone has half-angle asin(r/D); it meets the image plane
        // in a circle of radius f·tan(asin(r/D)).
        let rho = 500.0 * (r / depth).asin().tan();
        let area = PI * rho * rho;
        let rel = (img.covered() as f64 - area).abs() / area;
        assert!(rel < 0.02, "depth {depth}: {} pixels vs {area:.1}", img.covered());
    }
}

#[test]
fn perspective_correct_depth_on_a_tilted_square() {
    // A square tilted about y: depth along the center row is the ray-plane
    // intersection, not a screen-space lerp.
    let obj = square(0.4);
    let cam = front_camera();
    let tilt = poseval::rotation::rot_y(1.0);
    let pose = Pose::new_unchecked(tilt, Vector3::new(0.0, 0.0, 2.0));
    let img = render_depth(&[pose], &obj, &cam, 640, 480).unwrap();
    let normal = tilt * Vector3::z();
    let c = Vector3::new(0.0, 0.0, 2.0);
    for x in (250..390).step_by(7) {
        if let Some(z) = img.depth_at(x, 240) {
            let ray = Vector3::new((x as f64 - 319.5) / 500.0, (240.0 - 239.5) / 500.0, 1.0);
            let expect = normal.dot(&c) / normal.dot(&ray);
            assert!((z - expect).abs() < 1e-9 * expect, "x {x}: {z} vs {expect}");
        }
    }
}

#[test]
fn occlusion_rate_examples() {
    let cam = front_camera();
    let obj = square(0.2);
    assert_eq!(occlusion_rates(&[at(0.0, 0.0, 2.0)], &obj, &cam, 640, 480).unwrap(), vec![0.0]);
    // Outside the frustum.
    assert_eq!(occlusion_rates(&[at(50.0, 0.0, 2.0)], &obj, &cam, 640, 480).unwrap(), vec![1.0]);

    // Hidden behind a nearer copy, which projects three times larger.
    let o = occlusion_rates(&[at(0.0, 0.0, 3.0), at(0.0, 0.0, 1.0)], &obj, &cam, 640, 480).unwrap();
    assert_eq!(o, vec![1.0, 0.0]);

    // Half covered: the occluder at the same scale shifted by half a side.
    let far = at(0.0, 0.0, 2.0);
    let near = at(0.1, 0.0, 1.0);
    let o = occlusion_rates(&[far, near], &obj, &cam, 640, 480).unwrap();
    // The far square spans 50 px; the near one spans 100 px starting at the
    // far square's vertical midline. One pixel column is 1/50 of the width.
    assert!((o[0] - 0.5).abs() <= 1.0 / 50.0 + 1e-12, "o = {}", o[0]);
    assert_eq!(o[1], 0.0);
}

#[test]
fn rendering_is_bit_identical_across_runs() {
    let obj = brick();
    let s = spec(15, 11, &obj);
    let poses = sample_scene(&s, &obj).unwrap();
    let cam = top_view_camera(&s.bin, 640, 480);
    let a = render_depth(&poses, &obj, &cam, 640, 480).unwrap();
    let b = render_depth(&poses, &obj, &cam, 640, 480).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.depth_u16(), b.depth_u16());
    assert!(a.covered() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn removing_an_occluder_never_raises_occlusion(seed in any::<u64>(), n in 2usize..8, drop in 0usize..8) {
        let obj = brick();
        let s = spec(n, seed, &obj);
        let poses = sample_scene(&s, &obj).unwrap();
        let cam = top_view_camera(&s.bin, 160, 120);
        let full = occlusion_rates(&poses, &obj, &cam, 160, 120).unwrap();
        prop_assert!(full.iter().all(|o| (0.0..=1.0).contains(o)));
        let drop = drop % n;
        let mut rest = poses.clone();
        rest.remove(drop);
        let reduced = occlusion_rates(&rest, &obj, &cam, 160, 120).unwrap();
        let kept: Vec<f64> = full.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, o)| *o).collect();
        for (a, b) in reduced.iter().zip(&kept) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn occlusion_rates_stay_in_unit_interval(seed in any::<u64>()) {
        let obj = brick();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Crowded poses that may interpenetrate and leave the frustum.
        let poses: Vec<Pose> = (0..6)
            .map(|_| {
                let t = Vector3::from_fn(|_, _| rand::Rng::random_range(&mut rng, -0.2..0.2)) + Vector3::new(0.0, 0.0, 0.5);
                Pose::new_unchecked(random_rotation(&mut rng), t)
            })
            .collect();
        let o = occlusion_rates(&poses, &obj, &front_camera(), 160, 120).unwrap();
        prop_assert!(o.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
