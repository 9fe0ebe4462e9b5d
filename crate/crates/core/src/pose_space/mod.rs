//! Operations in pose space built on the representative embedding: exact
//! neighborhood queries, averaging, mean-shift mode finding and score-ordered
//! duplicate removal.

mod average;
mod filter;
mod index;
mod mean_shift;

pub use average::{average, average_around, pose_from_representative, weighted_average};
pub use filter::{filter_duplicates, filter_duplicates_by};
pub use index::{build_index, PoseIndex};
pub use mean_shift::{default_seeds, mean_shift, mean_shift_with, MeanShiftParams, Mode};

use thiserror::Error;

use crate::pose::Pose;

#[derive(Debug, Error, PartialEq)]
pub enum PoseSpaceError {
    #[error("no poses given")]
    Empty,
    #[error("weights must be finite and non-negative with at least one positive")]
    InvalidWeights,
    #[error("ambiguous mean: the averaged representative does not determine a pose")]
    AmbiguousMean,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
}

/// A pose with a score (higher is better) and an opaque identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPose {
    pub pose: Pose,
    pub score: f64,
    pub id: String,
}

impl ScoredPose {
    pub fn new(pose: Pose, score: f64, id: impl Into<String>) -> Self {
        Self {
            pose,
            score,
            id: id.into(),
        }
    }
}

/// Indices of `items` ordered by descending score, ties kept in input order.
pub(crate) fn by_descending_score(items: &[ScoredPose]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].score.total_cmp(&items[a].score));
    order
}
