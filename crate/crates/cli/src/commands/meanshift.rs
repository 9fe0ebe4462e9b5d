use std::path::PathBuf;

use poseval::config::RunConfig;
use poseval::formats::{read_votes, write_votes};
use poseval::pose_space::{default_seeds, mean_shift_with, MeanShiftParams};
use poseval::registry::KernelRegistry;
use poseval::ScoredPose;

use super::{emit, load_object, match_threshold, pose_space_failure};
use crate::failure::{Classify, CmdResult};

pub struct Options {
    pub object: PathBuf,
    pub votes: PathBuf,
    pub bandwidth: Option<f64>,
    pub kernel: String,
    pub seeds: usize,
    pub max_iter: usize,
    pub merge_fraction: f64,
    pub min_relative_density: f64,
    pub delta_fraction: f64,
    pub out: Option<PathBuf>,
}

/// Writes one line per mode, densest first, with the density as score.
pub fn run(o: Options) -> CmdResult {
    let object = load_object(&o.object)?;
    let delta = match_threshold(
        &object,
        &RunConfig {
            delta_fraction: o.delta_fraction,
            keep: o.seeds,
            ..RunConfig::default()
        },
    )?;
    let kernels = KernelRegistry::with_builtin_kernels();
    let kernel = kernels.get(&o.kernel).usage()?;
    let votes = read_votes(&o.votes).data()?;
    let bandwidth = o.bandwidth.unwrap_or(delta);
    let params = MeanShiftParams {
        max_iter: o.max_iter,
        merge_fraction: o.merge_fraction,
        min_relative_density: o.min_relative_density,
        kernel,
        ..MeanShiftParams::new(bandwidth)
    };
    let seeds = default_seeds(&votes, o.seeds);
    let modes = mean_shift_with(&votes, &object, &seeds, &params).map_err(pose_space_failure)?;
    let records: Vec<ScoredPose> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| ScoredPose::new(m.pose, m.density, format!("mode{i}")))
        .collect();
    let mut buf = Vec::new();
    write_votes(&mut buf, &records).data()?;
    emit(o.out.as_deref(), &buf)
}
