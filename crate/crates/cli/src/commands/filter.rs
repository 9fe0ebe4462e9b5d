use std::path::Path;

use poseval::config::RunConfig;
use poseval::formats::{read_votes, write_votes};
use poseval::pose_space::filter_duplicates_by;
use poseval::registry::MeasureRegistry;

use super::{emit, load_object, match_threshold, pose_space_failure};
use crate::failure::{Classify, CmdResult};
use crate::Thresholds;

pub fn run(
    object: &Path,
    votes: &Path,
    radius: Option<f64>,
    keep: usize,
    measure: &str,
    thresholds: &Thresholds,
    out: Option<&Path>,
) -> CmdResult {
    let object = load_object(object)?;
    let delta = match_threshold(
        &object,
        &RunConfig {
            delta_fraction: thresholds.delta_fraction,
            keep,
            ..RunConfig::default()
        },
    )?;
    let measures = MeasureRegistry::with_builtin_measures();
    let measure = measures.get(measure).usage()?;
    let hypotheses = read_votes(votes).data()?;
    let kept = filter_duplicates_by(measure, &hypotheses, &object, radius.unwrap_or(delta), keep).map_err(pose_space_failure)?;
    let mut buf = Vec::new();
    write_votes(&mut buf, &kept).data()?;
    emit(out, &buf)
}
