//! Reference evaluation of the pose distance directly from surface samples.
//!
//! This path never touches the representative embedding: it minimizes the RMS
//! displacement of the samples over the group elements one by one (finite class),
//! over an angular grid refined by a Newton step (revolution classes), or by
//! aligning the rotations outright (spherical class).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, Vector3};

use super::MetricError;
use crate::object::{sqrt_psd, ObjectError, ObjectModel};
use crate::pose::Pose;
use crate::rotation::{rot_x, rot_z};
use crate::symmetry::SymmetryClass;

/// Grid resolution of the revolution-angle search.
pub const REVOLUTION_GRID_STEPS: usize = 3600;

/// `((1/N) Σ xᵢ xᵢᵀ)^{1/2}` over a discrete sample set.
pub fn discrete_lambda(samples: &[Point3<f64>]) -> Result<Matrix3<f64>, ObjectError> {
    let mut m = Matrix3::zeros();
    for x in samples {
        m += x.coords * x.coords.transpose();
    }
    sqrt_psd(&(m / samples.len().max(1) as f64))
}

/// Mean squared displacement `(1/N) Σ ‖R₂ G xᵢ + t₂ − R₁ xᵢ − t₁‖²`.
fn mean_sq_displacement(a: &Pose, b: &Pose, g: &Matrix3<f64>, samples: &[Point3<f64>]) -> f64 {
    let m2 = b.rotation() * g;
    let sum: f64 = samples
        .iter()
        .map(|x| {
            let moved = m2 * x.coords + b.translation();
            let fixed = a.rotation() * x.coords + a.translation();
            (moved - fixed).norm_squared()
        })
        .sum();
    sum / samples.len() as f64
}

/// Objective over the revolution angle with its first two derivatives.
fn revolution_objective(
    a: &Pose,
    b: &Pose,
    branch: &Matrix3<f64>,
    alpha: f64,
    samples: &[Point3<f64>],
) -> (f64, f64, f64) {
    let (s, c) = alpha.sin_cos();
    let rz = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let drz = Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0);
    let ddrz = Matrix3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0);
    let base = b.rotation() * branch;
    let (m0, m1, m2) = (base * rz, base * drz, base * ddrz);
    let (mut f, mut df, mut ddf) = (0.0, 0.0, 0.0);
    for x in samples {
        let v: Vector3<f64> =
            m0 * x.coords + b.translation() - a.rotation() * x.coords - a.translation();
        let dv = m1 * x.coords;
        let ddv = m2 * x.coords;
        f += v.norm_squared();
        df += 2.0 * v.dot(&dv);
        ddf += 2.0 * (dv.norm_squared() + v.dot(&ddv));
    }
    let n = samples.len() as f64;
    (f / n, df / n, ddf / n)
}

/// RMS surface-sample displacement between `a` and `b`, minimized over the
/// object's symmetry group.
///
/// Agrees with [`super::distance`] when the object's `Λ` is [`discrete_lambda`]
/// of the same zero-mean samples.
pub fn distance_bruteforce(
    a: &Pose,
    b: &Pose,
    object: &ObjectModel,
    samples: &[Point3<f64>],
) -> Result<f64, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::EmptySamples);
    }
    let best = match object.class() {
        SymmetryClass::Finite => object
            .group()
            .rotations()
            .iter()
            .map(|g| mean_sq_displacement(a, b, g, samples))
            .fold(f64::INFINITY, f64::min),
        SymmetryClass::Spherical => {
            let align = b.rotation().transpose() * a.rotation();
            mean_sq_displacement(a, b, &align, samples)
        }
        class => {
            let mut branches = vec![Matrix3::identity()];
            if class == SymmetryClass::RevolutionRotoreflection {
                branches.push(rot_x(PI));
            }
            let mut best = f64::INFINITY;
            for branch in &branches {
                let (mut grid_best, mut grid_alpha) = (f64::INFINITY, 0.0);
                for k in 0..REVOLUTION_GRID_STEPS {
                    let alpha = 2.0 * PI * k as f64 / REVOLUTION_GRID_STEPS as f64;
                    let f = mean_sq_displacement(a, b, &(branch * rot_z(alpha)), samples);
                    if f < grid_best {
                        grid_best = f;
                        grid_alpha = alpha;
                    }
                }
                best = best.min(grid_best);
                let (_, df, ddf) = revolution_objective(a, b, branch, grid_alpha, samples);
                if ddf > 0.0 {
                    let polished = grid_alpha - df / ddf;
                    let (f, _, _) = revolution_objective(a, b, branch, polished, samples);
                    best = best.min(f);
                }
            }
            best
        }
    };
    Ok(best.max(0.0).sqrt())
}
