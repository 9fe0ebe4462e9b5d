use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use poseval::config::{RunConfig, FORMAT_VERSION};
use poseval::eval::{
    match_scene, per_scene_ap, pr_curve, precision_recall, Counts, EvalError, PrPoint, Scene, SceneEval,
};
use poseval::formats::{read_votes, write_pr_csv, SceneFile};
use poseval::ScoredPose;
use serde::Serialize;

use super::{emit, load_object, match_threshold};
use crate::failure::{fail, Classify, CmdResult, Failure, Kind};

pub struct Options {
    pub object: PathBuf,
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub delta_fraction: f64,
    pub delta_o: f64,
    pub top_n: Vec<usize>,
    pub per_scene_ap: bool,
    pub report: Option<PathBuf>,
    pub pr_csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SceneReport {
    name: String,
    #[serde(flatten)]
    eval: SceneEval,
    precision: Option<f64>,
    recall: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    format_version: u32,
    object: String,
    diameter: f64,
    delta: f64,
    delta_o: f64,
    n_scenes: usize,
    n_predictions: usize,
    n_interest: usize,
    /// Counts with every prediction retained.
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    precision: Option<f64>,
    recall: Option<f64>,
    ap: f64,
    /// APn keyed by n.
    ap_at: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_scene_ap: Option<Option<f64>>,
    pr_curve: Vec<PrPoint>,
    scenes: Vec<SceneReport>,
}

fn eval_failure(e: EvalError) -> Failure {
    let kind = match e {
        EvalError::InvalidParameter(_) => Kind::Usage,
        _ => Kind::Data,
    };
    Failure { kind, error: e.into() }
}

fn files_with_extensions(dir: &Path, exts: &[&str]) -> CmdResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))
        .data()?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.context("listing directory").data()?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && exts.contains(&ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

/// Predictions from votes, or a scene file read as score-1 detections.
fn read_predictions(path: &Path) -> CmdResult<Vec<ScoredPose>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return read_votes(path).data();
    }
    let scene = SceneFile::read(path).data()?;
    Ok(scene
        .ground_truth(path)
        .data()?
        .into_iter()
        .enumerate()
        .map(|(i, g)| ScoredPose::new(g.pose, 1.0, i.to_string()))
        .collect())
}

/// Pairs every ground-truth scene with its prediction file. An empty
/// prediction directory means no detections at all; otherwise every scene
/// must be present on both sides.
fn load_dataset(gt_dir: &Path, pred_dir: &Path) -> CmdResult<Vec<Scene>> {
    let gt_files = files_with_extensions(gt_dir, &["json"])?;
    if gt_files.is_empty() {
        return fail(Kind::Data, format!("no scene files in {}", gt_dir.display()));
    }
    let pred_files = files_with_extensions(pred_dir, &["json", "jsonl"])?;
    let mut by_stem: BTreeMap<String, PathBuf> = BTreeMap::new();
    for p in &pred_files {
        // Votes take precedence over a scene file of the same name.
        let slot = by_stem.entry(stem(p)).or_insert_with(|| p.clone());
        if p.extension().is_some_and(|e| e == "jsonl") {
            *slot = p.clone();
        }
    }
    let gt_stems: Vec<String> = gt_files.iter().map(|p| stem(p)).collect();
    if !pred_files.is_empty() {
        let mut missing: Vec<String> = gt_stems
            .iter()
            .filter(|s| !by_stem.contains_key(*s))
            .map(|s| format!("{s} (no predictions)"))
            .collect();
        missing.extend(
            by_stem
                .keys()
                .filter(|s| !gt_stems.contains(s))
                .map(|s| format!("{s} (no ground truth)")),
        );
        if !missing.is_empty() {
            return fail(Kind::Data, format!("unpaired scenes: {}", missing.join(", ")));
        }
    }
    gt_files
        .iter()
        .zip(gt_stems)
        .map(|(path, name)| {
            let gt = SceneFile::read(path).data()?.ground_truth(path).data()?;
            let predictions = match by_stem.get(&name) {
                Some(p) => read_predictions(p)?,
                None => Vec::new(),
            };
            Ok(Scene { name, predictions, gt })
        })
        .collect()
}

pub fn run(o: Options) -> CmdResult {
    let object = load_object(&o.object)?;
    let config = RunConfig {
        object: o.object.clone(),
        delta_fraction: o.delta_fraction,
        delta_o: o.delta_o,
        top_n: o.top_n.clone(),
        ..RunConfig::default()
    };
    let delta = match_threshold(&object, &config)?;
    let dataset = load_dataset(&o.gt, &o.pred)?;

    let mut total = Counts::default();
    let mut scenes = Vec::with_capacity(dataset.len());
    for s in &dataset {
        let eval = match_scene(&s.predictions, &s.gt, &object, delta, o.delta_o).map_err(eval_failure)?;
        total += eval.counts();
        let (precision, recall) = precision_recall(&eval);
        scenes.push(SceneReport {
            name: s.name.clone(),
            eval,
            precision,
            recall,
        });
    }
    let curve = pr_curve(&dataset, &object, delta, o.delta_o, None).map_err(eval_failure)?;
    let mut ap_at = BTreeMap::new();
    for &n in &o.top_n {
        ap_at.insert(n, pr_curve(&dataset, &object, delta, o.delta_o, Some(n)).map_err(eval_failure)?.ap);
    }
    let macro_ap = if o.per_scene_ap {
        Some(per_scene_ap(&dataset, &object, delta, o.delta_o, None).map_err(eval_failure)?)
    } else {
        None
    };
    let n_interest = scenes.iter().map(|s| s.eval.n_interest).sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let report = Report {
        format_version: FORMAT_VERSION,
        object: o.object.display().to_string(),
        diameter: object.diameter(),
        delta,
        delta_o: o.delta_o,
        n_scenes: dataset.len(),
        n_predictions: dataset.iter().map(|s| s.predictions.len()).sum(),
        n_interest,
        tp: total.tp,
        fp: total.fp,
        fn_: total.fn_,
        precision: ratio(total.tp, total.tp + total.fp),
        recall: ratio(total.tp, n_interest),
        ap: curve.ap,
        ap_at,
        per_scene_ap: macro_ap,
        pr_curve: curve.points.clone(),
        scenes,
    };

    let summary: Vec<String> = std::iter::once(format!("AP {:.6}", report.ap))
        .chain(report.ap_at.iter().map(|(n, v)| format!("AP{n} {v:.6}")))
        .collect();
    eprintln!("{}", summary.join("  "));

    if let Some(path) = &o.pr_csv {
        let mut buf = Vec::new();
        write_pr_csv(&mut buf, &curve).data()?;
        emit(Some(path), &buf)?;
    }
    let mut json = serde_json::to_string_pretty(&report).context("serializing report").data()?;
    json.push('\n');
    emit(o.report.as_deref(), json.as_bytes())
}
