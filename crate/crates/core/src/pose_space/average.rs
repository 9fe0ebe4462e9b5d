use nalgebra::{Matrix3, Vector3};

use crate::metric::representatives;
use crate::object::ObjectModel;
use crate::pose::Pose;
use crate::rotation::{nearest_rotation, rotation_aligning_z};
use crate::symmetry::SymmetryClass;

use super::{PoseSpaceError, ScoredPose};

/// Score-weighted mean of `poses`, anchored on the highest-scored one.
pub fn average(poses: &[ScoredPose], object: &ObjectModel) -> Result<Pose, PoseSpaceError> {
    let (list, weights): (Vec<Pose>, Vec<f64>) = poses.iter().map(|s| (s.pose, s.score)).unzip();
    weighted_average(&list, &weights, object)
}

/// Weighted mean anchored on the pose with the largest weight (first on ties).
pub fn weighted_average(
    poses: &[Pose],
    weights: &[f64],
    object: &ObjectModel,
) -> Result<Pose, PoseSpaceError> {
    check_weights(poses, weights)?;
    let reference = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, &w)| if w > weights[best] { i } else { best });
    average_around(&poses[reference], poses, weights, object)
}

fn check_weights(poses: &[Pose], weights: &[f64]) -> Result<(), PoseSpaceError> {
    if poses.is_empty() {
        return Err(PoseSpaceError::Empty);
    }
    if weights.len() != poses.len()
        || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || !weights.iter().any(|&w| w > 0.0)
    {
        return Err(PoseSpaceError::InvalidWeights);
    }
    Ok(())
}

/// Weighted mean in representative space around an explicit reference.
///
/// Each pose contributes its representative point closest to the reference's
/// first point; the weighted mean of those points is projected back to a pose
/// (nearest rotation for finite groups, axis renormalization for revolution
/// classes).
pub fn average_around(
    reference: &Pose,
    poses: &[Pose],
    weights: &[f64],
    object: &ObjectModel,
) -> Result<Pose, PoseSpaceError> {
    check_weights(poses, weights)?;
    let anchor = representatives(reference, object);
    let anchor = anchor.point(0);
    let dim = anchor.len();
    let mut mean = vec![0.0; dim];
    let mut total = 0.0;
    for (pose, &w) in poses.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let reps = representatives(pose, object);
        let (k, _) = reps.nearest_to(anchor);
        for (m, x) in mean.iter_mut().zip(reps.point(k)) {
            *m += w * x;
        }
        total += w;
    }
    for m in &mut mean {
        *m /= total;
    }

    project(&mean, object, reference.rotation())
}

/// Pose whose first representative is closest to an arbitrary point of
/// representative space. Spherical objects get the identity rotation.
pub fn pose_from_representative(point: &[f64], object: &ObjectModel) -> Result<Pose, PoseSpaceError> {
    if point.len() != crate::metric::representative_dim(object.class()) {
        return Err(PoseSpaceError::InvalidParameter(format!(
            "representative of dimension {} expected, got {}",
            crate::metric::representative_dim(object.class()),
            point.len()
        )));
    }
    project(point, object, &Matrix3::identity())
}

fn project(mean: &[f64], object: &ObjectModel, rotation: &Matrix3<f64>) -> Result<Pose, PoseSpaceError> {
    match object.class() {
        SymmetryClass::Finite => {
            let a = Matrix3::from_row_slice(&mean[..9]);
            let t = Vector3::new(mean[9], mean[10], mean[11]);
            let r = nearest_rotation(&(a * object.lambda())).ok_or(PoseSpaceError::AmbiguousMean)?;
            Ok(Pose::new_unchecked(r, t))
        }
        SymmetryClass::Revolution | SymmetryClass::RevolutionRotoreflection => {
            let lambda = object.lambda_scalar().expect("revolution objects carry λ");
            let axis = Vector3::new(mean[0], mean[1], mean[2]);
            if !(axis.norm() >= 1e-9 * lambda) {
                return Err(PoseSpaceError::AmbiguousMean);
            }
            let t = Vector3::new(mean[3], mean[4], mean[5]);
            Ok(Pose::new_unchecked(rotation_aligning_z(&axis), t))
        }
        SymmetryClass::Spherical => Ok(Pose::new_unchecked(
            *rotation,
            Vector3::new(mean[0], mean[1], mean[2]),
        )),
    }
}
