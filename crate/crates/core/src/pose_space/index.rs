use crate::kdtree::KdTree;
use crate::metric::{representative_dim, representatives};
use crate::object::ObjectModel;
use crate::pose::Pose;

use super::PoseSpaceError;

/// Exact nearest-neighbor and radius queries over a fixed set of poses.
///
/// Every representative point of every pose is stored in one kD-tree, tagged by
/// the pose's position in the input list. Query results are reported per pose.
#[derive(Clone, Debug)]
pub struct PoseIndex<'a> {
    object: &'a ObjectModel,
    poses: Vec<Pose>,
    tree: KdTree,
}

/// Builds a [`PoseIndex`] over `poses`; ids are positions in the list.
pub fn build_index<'a>(poses: &[Pose], object: &'a ObjectModel) -> Result<PoseIndex<'a>, PoseSpaceError> {
    PoseIndex::new(poses.to_vec(), object)
}

impl<'a> PoseIndex<'a> {
    pub fn new(poses: Vec<Pose>, object: &'a ObjectModel) -> Result<Self, PoseSpaceError> {
        if poses.is_empty() {
            return Err(PoseSpaceError::Empty);
        }
        let dim = representative_dim(object.class());
        let mut coords = Vec::new();
        let mut tags = Vec::new();
        for (i, pose) in poses.iter().enumerate() {
            let reps = representatives(pose, object);
            coords.extend_from_slice(reps.as_flat());
            tags.extend(std::iter::repeat_n(i as u32, reps.len()));
        }
        Ok(Self {
            object,
            poses,
            tree: KdTree::build(dim, &coords, &tags),
        })
    }

    pub fn object(&self) -> &ObjectModel {
        self.object
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Number of stored representative points.
    pub fn point_count(&self) -> usize {
        self.tree.len()
    }

    /// Closest stored pose and its distance; ties go to the lowest id.
    pub fn nearest(&self, query: &Pose) -> (usize, f64) {
        let reps = representatives(query, self.object);
        let q = reps.point(0);
        let (mut tag, d2) = self.tree.nearest(q).expect("index is never empty");
        let d = d2.sqrt();
        // Distinct squared distances can share a square root; ties are on the
        // reported distance, so look for a lower id just above `d2`.
        self.tree.within(q, d2 * (1.0 + 8.0 * f64::EPSILON), |t, e2| {
            if t < tag && e2.sqrt() == d {
                tag = t;
            }
        });
        (tag as usize, d)
    }

    /// All stored poses within distance `radius` (inclusive), ascending by
    /// distance then id.
    pub fn radius_search(&self, query: &Pose, radius: f64) -> Vec<(usize, f64)> {
        if radius.is_nan() || radius < 0.0 {
            return Vec::new();
        }
        let reps = representatives(query, self.object);
        let mut best = vec![f64::INFINITY; self.poses.len()];
        let mut hit = Vec::new();
        let max_sq = radius * radius * (1.0 + 1e-12);
        self.tree.within(reps.point(0), max_sq, |tag, d2| {
            let d = d2.sqrt();
            let slot = &mut best[tag as usize];
            if d <= radius && d < *slot {
                if slot.is_infinite() {
                    hit.push(tag as usize);
                }
                *slot = d;
            }
        });
        let mut out: Vec<(usize, f64)> = hit.into_iter().map(|i| (i, best[i])).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}
