//! Default thresholds and the batch run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Match threshold as a fraction of the object diameter.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.1;

/// Instances with an occlusion rate at or above this are not of interest.
pub const DEFAULT_DELTA_O: f64 = 0.5;

/// Number of hypotheses kept by duplicate filtering and used as mean-shift seeds.
pub const DEFAULT_KEEP: usize = 20;

/// Mean-shift modes closer than this fraction of the bandwidth are merged.
pub const DEFAULT_MERGE_FRACTION: f64 = 0.5;

/// Mean-shift modes weaker than this fraction of the strongest are dropped.
pub const DEFAULT_MIN_RELATIVE_DENSITY: f64 = 0.1;

/// Per-scene retrieval limits reported next to the unrestricted AP.
pub const DEFAULT_TOP_N: [usize; 2] = [1, 3];

/// Version written into every JSON document this crate produces.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} must lie in (0, 1], got {value}")]
    FractionOutOfRange { name: &'static str, value: f64 },
    #[error("top-n limits must be >= 1")]
    ZeroLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub object: PathBuf,
    pub delta_fraction: f64,
    pub delta_o: f64,
    pub top_n: Vec<usize>,
    pub keep: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            object: PathBuf::new(),
            delta_fraction: DEFAULT_DELTA_FRACTION,
            delta_o: DEFAULT_DELTA_O,
            top_n: DEFAULT_TOP_N.to_vec(),
            keep: DEFAULT_KEEP,
            seed: 0,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("delta_fraction", self.delta_fraction), ("delta_o", self.delta_o)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ConfigError::FractionOutOfRange { name, value });
            }
        }
        if self.top_n.contains(&0) || self.keep == 0 {
            return Err(ConfigError::ZeroLimit);
        }
        Ok(())
    }

    /// Absolute match threshold for an object of the given diameter.
    pub fn delta(&self, diameter: f64) -> f64 {
        self.delta_fraction * diameter
    }
}
