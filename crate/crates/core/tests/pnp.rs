use nalgebra::{Vector2, Vector3, Vector6};
use poseval::pnp::{
    residual_jacobian, retract, reprojection_residuals, solve_multiview_pnp, CameraModel,
    Correspondence, CorrespondenceSet, PnpError,
};
use poseval::rotation::{log_so3, random_rotation, rot_y};
use poseval::Pose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn rig() -> Vec<CameraModel> {
    vec![
        CameraModel::from_focal(800.0, 320.0, 240.0, Pose::identity()).unwrap(),
        CameraModel::from_focal(
            780.0,
            330.0,
            235.0,
            Pose::new_unchecked(rot_y(-0.25), Vector3::new(-0.3, 0.01, 0.08)),
        )
        .unwrap(),
    ]
}

fn markers(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1)))
        .collect()
}

fn diameter(pts: &[Vector3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in pts {
        for b in pts {
            d = d.max((a - b).norm());
        }
    }
    d
}

fn target(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new_unchecked(
        random_rotation(rng),
        Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(0.8..1.3)),
    )
}

fn observe(pts: &[Vector3<f64>], pose: &Pose, cams: &[CameraModel], noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>) -> CorrespondenceSet {
    let mut noise = noise;
    CorrespondenceSet::new(
        cams.iter()
            .map(|c| {
                pts.iter()
                    .map(|x| {
                        let mut p = c.project(&(pose.rotation() * x + pose.translation())).unwrap();
                        if let Some((n, rng)) = noise.as_mut() {
                            p += Vector2::new(n.sample(*rng), n.sample(*rng));
                        }
                        Correspondence { object: *x, pixel: p }
                    })
                    .collect()
            })
            .collect(),
    )
}

fn pose_error(a: &Pose, b: &Pose, scale: f64) -> f64 {
    let rot = log_so3(&(a.rotation() * b.rotation().transpose())).norm();
    rot * scale + (a.translation() - b.translation()).norm()
}

#[test]
fn noiseless_recovery_over_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cams = rig();
    for _ in 0..100 {
        let pts = markers(&mut rng, 8);
        let truth = target(&mut rng);
        let corr = observe(&pts, &truth, &cams, None);
        let sol = solve_multiview_pnp(&corr, &cams, None).unwrap();
        let d = diameter(&pts);
        assert!(pose_error(&sol.pose, &truth, d) < 1e-9 * d);
        assert!(sol.rms < 1e-10, "rms {}", sol.rms);
        assert!(sol.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn coplanar_markers_use_the_fallback_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cams = rig();
    for _ in 0..20 {
        let pts: Vec<Vector3<f64>> = markers(&mut rng, 8).into_iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect();
        let truth = target(&mut rng);
        let corr = observe(&pts, &truth, &cams, None);
        let sol = solve_multiview_pnp(&corr, &cams, None).unwrap();
        assert!(sol.rms < 1e-10);
        assert!(pose_error(&sol.pose, &truth, 0.2) < 1e-9);
    }
}

#[test]
fn analytic_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cams = rig();
    for _ in 0..100 {
        let pts = markers(&mut rng, 6);
        let truth = target(&mut rng);
        let corr = observe(&pts, &truth, &cams, None);
        let at = retract(&truth, &Vector6::from_fn(|_, _| rng.random_range(-0.02..0.02)));
        let (_, jac) = residual_jacobian(&at, &corr, &cams);
        let h = 1e-6;
        let mut fd = jac.clone() * 0.0;
        for k in 0..6 {
            let mut e = Vector6::zeros();
            e[k] = h;
            let (rp, _) = residual_jacobian(&retract(&at, &e), &corr, &cams);
            let (rm, _) = residual_jacobian(&retract(&at, &(-e)), &corr, &cams);
            for i in 0..rp.len() {
                fd[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rel = (&fd - &jac).norm() / jac.norm();
        assert!(rel < 1e-5, "relative error {rel}");
    }
}

#[test]
fn noisy_residual_matches_pixel_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cams = rig();
    let sigma = 0.5;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut mahalanobis = 0.0;
    for _ in 0..100 {
        let pts = markers(&mut rng, 8);
        let truth = target(&mut rng);
        let corr = observe(&pts, &truth, &cams, Some((&normal, &mut rng)));
        let sol = solve_multiview_pnp(&corr, &cams, None).unwrap();
        assert!((sol.rms - sigma).abs() <= 0.5 * sigma, "rms {}", sol.rms);
        // Chart coordinates of the truth relative to the estimate.
        let w = log_so3(&(truth.rotation() * sol.pose.rotation().transpose()));
        let v = truth.translation() - sol.pose.translation();
        let e = Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z);
        let inv = sol.covariance.try_inverse().unwrap();
        mahalanobis += (e.transpose() * inv * e)[0];
    }
    // Six degrees of freedom: the mean squared Mahalanobis error is about 6.
    let mean = mahalanobis / 100.0;
    assert!((3.0..12.0).contains(&mean), "mean Mahalanobis² {mean}");
}

#[test]
fn reference_camera_choice_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cams = rig();
    for _ in 0..20 {
        let pts = markers(&mut rng, 8);
        let truth = target(&mut rng);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let corr = observe(&pts, &truth, &cams, Some((&normal, &mut rng)));
        let a = solve_multiview_pnp(&corr, &cams, None).unwrap();
        // Re-express everything in the second camera's frame.
        let e2 = *cams[1].extrinsics();
        let moved: Vec<CameraModel> = cams
            .iter()
            .map(|c| CameraModel::new(*c.intrinsics(), c.extrinsics().compose(&e2.inverse())).unwrap())
            .collect();
        let b = solve_multiview_pnp(&corr, &moved, None).unwrap();
        let d = diameter(&pts);
        assert!(pose_error(&e2.compose(&a.pose), &b.pose, d) < 1e-7 * d);
    }
}

#[test]
fn residuals_shrink_with_translation_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cams = rig();
    let pts = markers(&mut rng, 5);
    let truth = target(&mut rng);
    let corr = observe(&pts, &truth, &cams, None);
    let norm_at = |eps: f64| -> f64 {
        let p = Pose::new_unchecked(*truth.rotation(), truth.translation() + Vector3::new(eps, 0.0, 0.0));
        reprojection_residuals(&p, &corr, &cams)
            .iter()
            .map(|r| r.error.unwrap().norm())
            .sum()
    };
    assert!(norm_at(0.0) < 1e-9);
    assert!(norm_at(1e-2) > norm_at(1e-3) && norm_at(1e-3) > norm_at(1e-4) && norm_at(1e-4) > 0.0);
}

#[test]
fn bad_fit_is_reported_as_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cams = rig();
    let pts = markers(&mut rng, 8);
    let truth = target(&mut rng);
    let mut corr = observe(&pts, &truth, &cams, None);
    // Scramble pixel assignments so no rigid pose explains them.
    let pixels: Vec<Vector2<f64>> = corr.per_camera[0].iter().rev().map(|c| c.pixel).collect();
    for (c, p) in corr.per_camera[0].iter_mut().zip(pixels) {
        c.pixel = p;
    }
    assert!(matches!(
        solve_multiview_pnp(&corr, &cams, None),
        Err(PnpError::Diverged { .. })
    ));
}
