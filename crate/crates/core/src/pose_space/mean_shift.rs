use rayon::prelude::*;

use crate::config::{DEFAULT_MERGE_FRACTION, DEFAULT_MIN_RELATIVE_DENSITY};
use crate::metric::distance;
use crate::object::ObjectModel;
use crate::pose::Pose;
use crate::registry::{Epanechnikov, Kernel};

use super::{average_around, by_descending_score, PoseIndex, PoseSpaceError, ScoredPose};

#[derive(Clone, Copy)]
pub struct MeanShiftParams<'k> {
    pub bandwidth: f64,
    pub max_iter: usize,
    /// Convergence threshold on the pose shift, in length units.
    pub tol: f64,
    /// Modes closer than `merge_fraction * bandwidth` are merged.
    pub merge_fraction: f64,
    /// Modes below this fraction of the strongest mode's density are
    /// dropped. Stray high-scored votes make isolated seeds that are local
    /// maxima of their own.
    pub min_relative_density: f64,
    pub kernel: &'k dyn Kernel,
}

impl<'k> MeanShiftParams<'k> {
    pub fn new(bandwidth: f64) -> Self {
        Self {
            bandwidth,
            max_iter: 100,
            tol: 1e-6 * bandwidth,
            merge_fraction: DEFAULT_MERGE_FRACTION,
            min_relative_density: DEFAULT_MIN_RELATIVE_DENSITY,
            kernel: &Epanechnikov,
        }
    }

    fn validate(&self) -> Result<(), PoseSpaceError> {
        let bad = |msg: String| Err(PoseSpaceError::InvalidParameter(msg));
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return bad(format!("bandwidth must be positive and finite, got {}", self.bandwidth));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tolerance must be >= 0, got {}", self.tol));
        }
        if !(self.merge_fraction >= 0.0) {
            return bad(format!("merge fraction must be >= 0, got {}", self.merge_fraction));
        }
        if !(0.0..=1.0).contains(&self.min_relative_density) {
            return bad(format!("minimum relative density must lie in [0, 1], got {}", self.min_relative_density));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        Ok(())
    }
}

impl std::fmt::Debug for MeanShiftParams<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeanShiftParams")
            .field("bandwidth", &self.bandwidth)
            .field("max_iter", &self.max_iter)
            .field("tol", &self.tol)
            .field("merge_fraction", &self.merge_fraction)
            .field("min_relative_density", &self.min_relative_density)
            .field("kernel", &self.kernel.name())
            .finish()
    }
}

/// A local maximum of the kernel density over the votes.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub pose: Pose,
    /// Kernel-weighted vote mass at `pose`.
    pub density: f64,
    pub seed: usize,
    pub seed_density: f64,
    pub iterations: usize,
    /// Density after each accepted step, starting with the seed's.
    pub density_trace: Vec<f64>,
    pub converged: bool,
}

/// The `keep` highest-scored votes, ties in input order.
pub fn default_seeds(votes: &[ScoredPose], keep: usize) -> Vec<Pose> {
    by_descending_score(votes)
        .into_iter()
        .take(keep)
        .map(|i| votes[i].pose)
        .collect()
}

/// Mean shift with the Epanechnikov kernel and default merging and pruning.
pub fn mean_shift(
    votes: &[ScoredPose],
    object: &ObjectModel,
    bandwidth: f64,
    seeds: &[Pose],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<Mode>, PoseSpaceError> {
    let params = MeanShiftParams {
        max_iter,
        tol,
        ..MeanShiftParams::new(bandwidth)
    };
    mean_shift_with(votes, object, seeds, &params)
}

/// Mean shift from every seed, run in parallel, then merged.
///
/// Each step replaces the window center by the kernel-weighted average of the
/// votes within one bandwidth. A step that would lower the density is
/// rejected and ends the run, so a mode's density is never below its seed's.
/// Returned modes are merged, pruned by relative density and sorted by
/// decreasing density. The strongest mode always survives.
pub fn mean_shift_with(
    votes: &[ScoredPose],
    object: &ObjectModel,
    seeds: &[Pose],
    params: &MeanShiftParams<'_>,
) -> Result<Vec<Mode>, PoseSpaceError> {
    params.validate()?;
    if votes.is_empty() {
        return Err(PoseSpaceError::Empty);
    }
    if let Some(v) = votes.iter().find(|v| !(v.score.is_finite() && v.score >= 0.0)) {
        return Err(PoseSpaceError::InvalidParameter(format!(
            "vote '{}' has score {}; mean shift needs finite non-negative scores",
            v.id, v.score
        )));
    }
    let index = PoseIndex::new(votes.iter().map(|v| v.pose).collect(), object)?;
    let scores: Vec<f64> = votes.iter().map(|v| v.score).collect();
    let shifter = Shifter {
        index: &index,
        scores: &scores,
        params,
    };
    let modes: Vec<Mode> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| shifter.climb(i, *seed))
        .collect();
    let mut modes = merge_modes(modes, object, params.merge_fraction * params.bandwidth);
    if let Some(top) = modes.first().map(|m| m.density) {
        modes.retain(|m| m.density >= params.min_relative_density * top);
    }
    Ok(modes)
}

struct Shifter<'a> {
    index: &'a PoseIndex<'a>,
    scores: &'a [f64],
    params: &'a MeanShiftParams<'a>,
}

impl Shifter<'_> {
    fn window(&self, center: &Pose) -> Vec<(usize, f64)> {
        self.index.radius_search(center, self.params.bandwidth)
    }

    fn density(&self, window: &[(usize, f64)]) -> f64 {
        let h2 = self.params.bandwidth * self.params.bandwidth;
        window
            .iter()
            .map(|&(i, d)| self.scores[i] * self.params.kernel.profile(d * d / h2))
            .sum()
    }

    fn climb(&self, seed_index: usize, seed: Pose) -> Mode {
        let object = self.index.object();
        let h2 = self.params.bandwidth * self.params.bandwidth;
        let mut center = seed;
        let mut window = self.window(&center);
        let mut density = self.density(&window);
        let mut trace = vec![density];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.params.max_iter {
            let (poses, weights): (Vec<Pose>, Vec<f64>) = window
                .iter()
                .map(|&(i, d)| {
                    let w = self.scores[i] * self.params.kernel.shift_weight(d * d / h2);
                    (self.index.poses()[i], w)
                })
                .filter(|(_, w)| *w > 0.0)
                .unzip();
            if poses.is_empty() {
                converged = true;
                break;
            }
            let Ok(next) = average_around(&center, &poses, &weights, object) else {
                break;
            };
            iterations += 1;
            let next_window = self.window(&next);
            let next_density = self.density(&next_window);
            if next_density < density {
                // Projection onto the pose manifold can overshoot; keep the
                // better point.
                converged = true;
                break;
            }
            let shift = distance(&center, &next, object);
            center = next;
            window = next_window;
            density = next_density;
            trace.push(density);
            if shift <= self.params.tol {
                converged = true;
                break;
            }
        }
        Mode {
            pose: center,
            density,
            seed: seed_index,
            seed_density: trace[0],
            iterations,
            density_trace: trace,
            converged,
        }
    }
}

fn merge_modes(mut modes: Vec<Mode>, object: &ObjectModel, radius: f64) -> Vec<Mode> {
    modes.sort_by(|a, b| b.density.total_cmp(&a.density).then(a.seed.cmp(&b.seed)));
    let mut kept: Vec<Mode> = Vec::new();
    for m in modes {
        if kept.iter().all(|k| distance(&k.pose, &m.pose, object) >= radius) {
            kept.push(m);
        }
    }
    kept
}
