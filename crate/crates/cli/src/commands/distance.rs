use std::path::Path;

use anyhow::Context;
use poseval::config::RunConfig;
use poseval::formats::read_pose;
use poseval::registry::MeasureRegistry;

use super::{load_object, match_threshold};
use crate::failure::{Classify, CmdResult};
use crate::Thresholds;

pub fn run(object: &Path, a: &Path, b: &Path, thresholds: &Thresholds) -> CmdResult {
    let object = load_object(object)?;
    let delta = match_threshold(
        &object,
        &RunConfig {
            delta_fraction: thresholds.delta_fraction,
            ..RunConfig::default()
        },
    )?;
    let pa = read_pose(a).data()?;
    let pb = read_pose(b).data()?;
    let measures = MeasureRegistry::with_builtin_measures();
    let mut pose_distance = f64::NAN;
    for m in measures.iter() {
        let value = m
            .measure(&pa, &pb, &object)
            .with_context(|| format!("measure {}", m.name()))
            .numerical()?;
        if m.name() == "pose" {
            pose_distance = value;
        }
        println!("{:<16}{value}", m.name());
    }
    println!("{:<16}{delta}", "delta");
    let verdict = if pose_distance < delta { "MATCH" } else { "NO MATCH" };
    println!("{:<16}{verdict}", "verdict");
    Ok(())
}
