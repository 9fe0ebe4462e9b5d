use crate::metric::{distance, MetricError};
use crate::object::ObjectModel;
use crate::pose::Pose;
use crate::registry::PoseMeasure;

use super::{by_descending_score, PoseSpaceError, ScoredPose};

/// Greedy non-maximum suppression in pose space.
///
/// Hypotheses are visited by descending score (input order on ties) and kept
/// only when their distance to every kept one exceeds `radius`. At most `keep`
/// survive. Inherently sequential.
pub fn filter_duplicates(
    hypotheses: &[ScoredPose],
    object: &ObjectModel,
    radius: f64,
    keep: usize,
) -> Result<Vec<ScoredPose>, PoseSpaceError> {
    filter_with(hypotheses, radius, keep, |a, b| Ok(distance(a, b, object)))
}

/// Same as [`filter_duplicates`] with any registered dissimilarity.
pub fn filter_duplicates_by(
    measure: &dyn PoseMeasure,
    hypotheses: &[ScoredPose],
    object: &ObjectModel,
    radius: f64,
    keep: usize,
) -> Result<Vec<ScoredPose>, PoseSpaceError> {
    filter_with(hypotheses, radius, keep, |a, b| measure.measure(a, b, object))
}

fn filter_with(
    hypotheses: &[ScoredPose],
    radius: f64,
    keep: usize,
    dist: impl Fn(&Pose, &Pose) -> Result<f64, MetricError>,
) -> Result<Vec<ScoredPose>, PoseSpaceError> {
    if radius.is_nan() || radius < 0.0 {
        return Err(PoseSpaceError::InvalidParameter(format!("radius must be >= 0, got {radius}")));
    }
    if keep == 0 {
        return Err(PoseSpaceError::InvalidParameter("keep must be >= 1".into()));
    }
    if let Some(bad) = hypotheses.iter().find(|h| !h.score.is_finite()) {
        return Err(PoseSpaceError::InvalidParameter(format!(
            "score of '{}' is not finite",
            bad.id
        )));
    }
    let mut kept: Vec<ScoredPose> = Vec::new();
    for i in by_descending_score(hypotheses) {
        if kept.len() == keep {
            break;
        }
        let h = &hypotheses[i];
        let mut fresh = true;
        for k in &kept {
            if dist(&k.pose, &h.pose)? <= radius {
                fresh = false;
                break;
            }
        }
        if fresh {
            kept.push(h.clone());
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::rot_z;
    use crate::shapes;
    use crate::symmetry::ProperSymmetryGroup;
    use nalgebra::{Matrix3, Vector3};
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn brick(group: ProperSymmetryGroup) -> ObjectModel {
        ObjectModel::new(shapes::cuboid(0.05, 0.1, 0.2), group).unwrap()
    }

    fn brick_group() -> ProperSymmetryGroup {
        ProperSymmetryGroup::finite(vec![Matrix3::identity(), rot_z(PI)]).unwrap()
    }

    #[test]
    fn exact_duplicate_keeps_higher_score() {
        let obj = brick(brick_group());
        let p = Pose::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 1.0);
        let hyps = vec![ScoredPose::new(p, 0.3, "a"), ScoredPose::new(p, 0.7, "b")];
        let out = filter_duplicates(&hyps, &obj, 0.01, 20).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "b");
    }

    #[test]
    fn far_apart_keeps_top_by_score() {
        let obj = brick(brick_group());
        let hyps: Vec<ScoredPose> = (0..5)
            .map(|i| {
                ScoredPose::new(
                    Pose::from_translation(Vector3::new(i as f64, 0.0, 0.0)),
                    [0.5, 0.9, 0.5, 0.1, 0.7][i],
                    i.to_string(),
                )
            })
            .collect();
        let ids: Vec<String> = filter_duplicates(&hyps, &obj, 0.1, 3)
            .unwrap()
            .into_iter()
            .map(|h| h.id)
            .collect();
        assert_eq!(ids, ["1", "4", "0"]);
    }

    #[test]
    fn symmetry_merges_brick_flip() {
        let p = Pose::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(2), 1.0);
        let hyps = vec![
            ScoredPose::new(p, 0.9, "p"),
            ScoredPose::new(p.with_object_rotation(&rot_z(PI)), 0.8, "q"),
        ];
        let sym = brick(brick_group());
        let plain = brick(ProperSymmetryGroup::trivial());
        let r = 0.1 * sym.diameter();
        assert_eq!(filter_duplicates(&hyps, &sym, r, 20).unwrap().len(), 1);
        assert_eq!(filter_duplicates(&hyps, &plain, r, 20).unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        let obj = brick(brick_group());
        assert!(filter_duplicates(&[], &obj, -1.0, 1).is_err());
        assert!(filter_duplicates(&[], &obj, 1.0, 0).is_err());
        assert!(filter_duplicates(&[], &obj, 1.0, 1).unwrap().is_empty());
    }
}
