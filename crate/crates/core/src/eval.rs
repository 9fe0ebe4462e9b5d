//! Detection and pose-estimation evaluation for scenes with many instances.
//!
//! Predictions and ground-truth instances are matched one-to-one by mutual
//! nearest neighbors under the pose distance; a pair counts when its distance
//! is below `delta`. Only instances with an occlusion rate below `delta_o` have
//! to be retrieved. Predictions matched to other instances are neutral.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::distance;
use crate::object::ObjectModel;
use crate::pose::Pose;
use crate::pose_space::{PoseIndex, ScoredPose};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("occlusion rate {0} outside [0, 1]")]
    InvalidOcclusion(f64),
    #[error("prediction '{id}' has non-finite score")]
    NonFiniteScore { id: String },
    #[error("dataset has no scenes")]
    EmptyDataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub pose: Pose,
    pub occlusion_rate: f64,
}

impl GroundTruthInstance {
    pub fn new(pose: Pose, occlusion_rate: f64) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&occlusion_rate) {
            return Err(EvalError::InvalidOcclusion(occlusion_rate));
        }
        Ok(Self {
            pose,
            occlusion_rate,
        })
    }
}

/// Indices of the instances of interest: occlusion strictly below `delta_o`.
pub fn select_interest(gt: &[GroundTruthInstance], delta_o: f64) -> Vec<usize> {
    gt.iter()
        .enumerate()
        .filter(|(_, g)| g.occlusion_rate < delta_o)
        .map(|(i, _)| i)
        .collect()
}

/// Matching outcome for one scene. Indices refer to the input lists.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEval {
    /// `(prediction, ground truth)` pairs, ascending by prediction.
    pub tp: Vec<(usize, usize)>,
    pub fp: Vec<usize>,
    #[serde(rename = "fn")]
    pub fn_: Vec<usize>,
    pub n_uninteresting_matches: usize,
    pub n_interest: usize,
    pub n_predictions: usize,
}

impl SceneEval {
    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp.len(),
            fp: self.fp.len(),
            fn_: self.fn_.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl std::ops::SubAssign for Counts {
    fn sub_assign(&mut self, o: Self) {
        self.tp -= o.tp;
        self.fp -= o.fp;
        self.fn_ -= o.fn_;
    }
}

fn check_params(delta: f64, delta_o: f64) -> Result<(), EvalError> {
    if !(delta > 0.0) {
        return Err(EvalError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(delta_o > 0.0 && delta_o <= 1.0) {
        return Err(EvalError::InvalidParameter(format!("delta_o must be in (0, 1], got {delta_o}")));
    }
    Ok(())
}

/// Mutual-nearest matching of one scene.
///
/// The nearest prediction to an instance is chosen by distance, then higher
/// score, then lower index; the nearest instance to a prediction by distance,
/// then lower index. Nearest instances are searched over all of `gt`. The
/// match test on a pair always uses the distance measured from the
/// prediction, so it cannot disagree with itself at rounding level.
pub fn match_scene(
    predictions: &[ScoredPose],
    gt: &[GroundTruthInstance],
    object: &ObjectModel,
    delta: f64,
    delta_o: f64,
) -> Result<SceneEval, EvalError> {
    check_params(delta, delta_o)?;
    if let Some(p) = predictions.iter().find(|p| !p.score.is_finite()) {
        return Err(EvalError::NonFiniteScore { id: p.id.clone() });
    }
    if let Some(g) = gt.iter().find(|g| !(0.0..=1.0).contains(&g.occlusion_rate)) {
        return Err(EvalError::InvalidOcclusion(g.occlusion_rate));
    }
    let interest = select_interest(gt, delta_o);
    let mut eval = SceneEval {
        n_interest: interest.len(),
        n_predictions: predictions.len(),
        ..SceneEval::default()
    };
    if predictions.is_empty() || gt.is_empty() {
        eval.fp = (0..predictions.len()).collect();
        eval.fn_ = interest;
        return Ok(eval);
    }

    let gt_index = PoseIndex::new(gt.iter().map(|g| g.pose).collect(), object)
        .expect("ground truth is not empty");
    // Predictions are indexed in preference order so the index's lowest-tag
    // tie-break selects the higher score, then the lower input index.
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].score.total_cmp(&predictions[a].score));
    let pred_index = PoseIndex::new(order.iter().map(|&i| predictions[i].pose).collect(), object)
        .expect("predictions are not empty");

    let nearest_gt: Vec<(usize, f64)> = predictions.iter().map(|p| gt_index.nearest(&p.pose)).collect();
    let nearest_pred: Vec<usize> = gt
        .iter()
        .map(|g| order[pred_index.nearest(&g.pose).0])
        .collect();

    let is_interest: Vec<bool> = gt.iter().map(|g| g.occlusion_rate < delta_o).collect();
    for (p, &(t, d)) in nearest_gt.iter().enumerate() {
        let mutual = d < delta && nearest_pred[t] == p;
        match (mutual, is_interest[t]) {
            (true, true) => eval.tp.push((p, t)),
            (true, false) => eval.n_uninteresting_matches += 1,
            (false, _) => eval.fp.push(p),
        }
    }
    eval.fn_ = interest
        .into_iter()
        .filter(|&t| {
            let p = nearest_pred[t];
            !(nearest_gt[p].1 < delta && nearest_gt[p].0 == t)
        })
        .collect();
    Ok(eval)
}

/// `(precision, recall)`; each is `None` when its denominator is zero.
pub fn precision_recall(eval: &SceneEval) -> (Option<f64>, Option<f64>) {
    ratios(eval.counts())
}

fn ratios(c: Counts) -> (Option<f64>, Option<f64>) {
    let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    (frac(c.tp, c.tp + c.fp), frac(c.tp, c.tp + c.fn_))
}

/// Recall when at most `n` results were returned: `|TP| / min(n, |T_o|)`.
pub fn recall_limited(eval: &SceneEval, n: usize) -> Option<f64> {
    let den = n.min(eval.tp.len() + eval.fn_.len());
    (den > 0).then(|| eval.tp.len() as f64 / den as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub predictions: Vec<ScoredPose>,
    pub gt: Vec<GroundTruthInstance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, thresholds descending.
    pub points: Vec<PrPoint>,
    pub ap: f64,
}

/// Top `n` predictions of a scene by score, ties in input order.
fn truncate(preds: &[ScoredPose], n: Option<usize>) -> Vec<ScoredPose> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    order
        .into_iter()
        .take(n.unwrap_or(usize::MAX))
        .map(|i| preds[i].clone())
        .collect()
}

/// Precision/recall curve from a single score threshold swept over all scenes.
///
/// At every distinct prediction score `s` (descending), each scene keeps its
/// predictions scored `>= s`, truncated to its `n_limit` best when given,
/// and is matched again. Counts are pooled over scenes. With `n_limit`, recall
/// is `Σ|TP| / Σ min(n, |T_o|)`. Points with undefined precision or recall
/// are omitted. AP is the trapezoidal area over recall with the curve
/// extended flat to recall 0; an empty curve has AP 0.
pub fn pr_curve(
    dataset: &[Scene],
    object: &ObjectModel,
    delta: f64,
    delta_o: f64,
    n_limit: Option<usize>,
) -> Result<PrCurve, EvalError> {
    check_params(delta, delta_o)?;
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if n_limit == Some(0) {
        return Err(EvalError::InvalidParameter("n must be >= 1".into()));
    }
    let recall_den: usize = dataset
        .iter()
        .map(|s| {
            let n_o = select_interest(&s.gt, delta_o).len();
            n_limit.map_or(n_o, |n| n.min(n_o))
        })
        .sum();

    let mut thresholds: Vec<f64> = Vec::new();
    for scene in dataset {
        for p in &scene.predictions {
            if !p.score.is_finite() {
                return Err(EvalError::NonFiniteScore { id: p.id.clone() });
            }
            thresholds.push(p.score);
        }
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    // Per-scene counts only change when the threshold passes one of the
    // scene's own scores, so only those scenes are matched again.
    let empty: Vec<Counts> = dataset
        .par_iter()
        .map(|s| match_scene(&[], &s.gt, object, delta, delta_o).map(|e| e.counts()))
        .collect::<Result<_, _>>()?;
    let mut current = empty;
    let mut total = Counts::default();
    for c in &current {
        total += *c;
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &s in &thresholds {
        let changed: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset[i].predictions.iter().any(|p| p.score == s))
            .collect();
        let updates: Vec<(usize, Counts)> = changed
            .par_iter()
            .map(|&i| {
                let kept: Vec<ScoredPose> = dataset[i]
                    .predictions
                    .iter()
                    .filter(|p| p.score >= s)
                    .cloned()
                    .collect();
                let kept = truncate(&kept, n_limit);
                match_scene(&kept, &dataset[i].gt, object, delta, delta_o).map(|e| (i, e.counts()))
            })
            .collect::<Result<_, _>>()?;
        for (i, c) in updates {
            total -= current[i];
            total += c;
            current[i] = c;
        }
        let precision = ratios(total).0;
        let recall = (recall_den > 0).then(|| total.tp as f64 / recall_den as f64);
        if let (Some(precision), Some(recall)) = (precision, recall) {
            points.push(PrPoint {
                threshold: s,
                precision,
                recall,
                tp: total.tp,
                fp: total.fp,
            });
        }
    }
    let ap = area_under(&points);
    Ok(PrCurve { points, ap })
}

/// Trapezoidal area over recall, points stably sorted by recall, starting
/// flat from recall 0 at the first point's precision.
pub fn area_under(points: &[PrPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(&(_, p0)) = pts.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let mut prev = (0.0, p0);
    for &(r, p) in &pts {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

/// AP with at most `n` results per scene and limited-retrieval recall.
pub fn ap_at_n(
    dataset: &[Scene],
    object: &ObjectModel,
    delta: f64,
    delta_o: f64,
    n: usize,
) -> Result<f64, EvalError> {
    Ok(pr_curve(dataset, object, delta, delta_o, Some(n))?.ap)
}

/// Mean of per-scene APs over scenes with at least one instance of interest.
pub fn per_scene_ap(
    dataset: &[Scene],
    object: &ObjectModel,
    delta: f64,
    delta_o: f64,
    n_limit: Option<usize>,
) -> Result<Option<f64>, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut aps = Vec::new();
    for scene in dataset {
        if select_interest(&scene.gt, delta_o).is_empty() {
            continue;
        }
        let curve = pr_curve(std::slice::from_ref(scene), object, delta, delta_o, n_limit)?;
        aps.push(curve.ap);
    }
    Ok((!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64))
}

/// Exhaustive reference matcher: a direct reading of the set definitions over
/// the full distance matrix. Quadratic; meant for small scenes and tests.
pub fn match_scene_bruteforce(
    predictions: &[ScoredPose],
    gt: &[GroundTruthInstance],
    object: &ObjectModel,
    delta: f64,
    delta_o: f64,
) -> SceneEval {
    let d: Vec<Vec<f64>> = predictions
        .iter()
        .map(|p| gt.iter().map(|g| distance(&p.pose, &g.pose, object)).collect())
        .collect();
    let n_t = |p: usize| -> Option<usize> {
        let mut best: Option<usize> = None;
        for t in 0..gt.len() {
            if best.is_none_or(|b| d[p][t] < d[p][b]) {
                best = Some(t);
            }
        }
        best
    };
    // Nearest-prediction queries use the instance as the query pose.
    let e: Vec<Vec<f64>> = gt
        .iter()
        .map(|g| predictions.iter().map(|p| distance(&g.pose, &p.pose, object)).collect())
        .collect();
    let n_p = |t: usize| -> Option<usize> {
        let mut best: Option<usize> = None;
        for p in 0..predictions.len() {
            let better = match best {
                None => true,
                Some(b) => {
                    e[t][p] < e[t][b]
                        || (e[t][p] == e[t][b] && predictions[p].score > predictions[b].score)
                }
            };
            if better {
                best = Some(p);
            }
        }
        best
    };
    let m = |p: usize, t: usize| d[p][t] < delta;
    let interest: Vec<bool> = gt.iter().map(|g| g.occlusion_rate < delta_o).collect();
    let mut eval = SceneEval {
        n_interest: interest.iter().filter(|&&b| b).count(),
        n_predictions: predictions.len(),
        ..SceneEval::default()
    };
    for p in 0..predictions.len() {
        for t in 0..gt.len() {
            if interest[t] && m(p, t) && n_p(t) == Some(p) && n_t(p) == Some(t) {
                eval.tp.push((p, t));
            }
        }
        let fp = match n_t(p) {
            None => true,
            Some(t) => !m(p, t) || n_p(t) != Some(p),
        };
        if fp {
            eval.fp.push(p);
        } else if !interest[n_t(p).unwrap()] {
            eval.n_uninteresting_matches += 1;
        }
    }
    for t in 0..gt.len() {
        if !interest[t] {
            continue;
        }
        let fn_ = match n_p(t) {
            None => true,
            Some(p) => !m(p, t) || n_t(p) != Some(t),
        };
        if fn_ {
            eval.fn_.push(t);
        }
    }
    eval
}
