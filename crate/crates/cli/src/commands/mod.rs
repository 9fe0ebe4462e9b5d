pub mod annotate;
pub mod distance;
pub mod evaluate;
pub mod filter;
pub mod gen_scenes;
pub mod meanshift;
pub mod occlusion;

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use poseval::config::RunConfig;
use poseval::{ObjectModel, PoseSpaceError};

use crate::failure::{Classify, CmdResult, Failure, Kind};

pub fn load_object(path: &Path) -> CmdResult<ObjectModel> {
    poseval::load_object_descriptor(path)
        .with_context(|| format!("loading object {}", path.display()))
        .data()
}

/// Checks threshold flags and returns the absolute match threshold.
pub fn match_threshold(object: &ObjectModel, config: &RunConfig) -> CmdResult<f64> {
    config.validate().usage()?;
    Ok(config.delta(object.diameter()))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => fs::write(p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .data(),
        None => std::io::stdout().write_all(bytes).context("writing stdout").data(),
    }
}

/// Parameter problems are usage errors, degenerate results numerical ones.
pub fn pose_space_failure(e: PoseSpaceError) -> Failure {
    let kind = match e {
        PoseSpaceError::InvalidParameter(_) => Kind::Usage,
        PoseSpaceError::Empty | PoseSpaceError::InvalidWeights => Kind::Data,
        PoseSpaceError::AmbiguousMean | PoseSpaceError::Metric(_) => Kind::Numerical,
    };
    Failure { kind, error: e.into() }
}
