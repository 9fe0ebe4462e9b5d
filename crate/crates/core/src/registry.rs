//! Named, runtime-selectable strategies.
//!
//! Pose dissimilarity measures and mean-shift kernels are registered by name so
//! the command line (or any caller) can pick them from configuration.

use std::fmt;

use thiserror::Error;

use crate::metric::{self, AdiDirection, MetricError};
use crate::object::ObjectModel;
use crate::pose::Pose;

/// Anything that can be looked up in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("'{0}' is already registered")]
    Duplicate(&'static str),
    #[error("unknown {kind} '{name}' (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
}

/// Insertion-ordered collection of boxed strategies keyed by [`Named::name`].
pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn empty(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    pub fn register(&mut self, entry: Box<T>) -> Result<(), RegistryError> {
        if self.entries.iter().any(|e| e.name() == entry.name()) {
            return Err(RegistryError::Duplicate(entry.name()));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&T, RegistryError> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| RegistryError::Unknown {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

impl<T: ?Sized + Named> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.names())
            .finish()
    }
}

/// A dissimilarity between two poses of the same object.
pub trait PoseMeasure: Named + Send + Sync {
    fn measure(&self, a: &Pose, b: &Pose, object: &ObjectModel) -> Result<f64, MetricError>;
}

pub type MeasureRegistry = Registry<dyn PoseMeasure>;

/// Closed-form symmetry-aware distance over representative sets.
#[derive(Debug, Default, Clone, Copy)]
pub struct PoseDistance;

impl Named for PoseDistance {
    fn name(&self) -> &'static str {
        "pose"
    }
    fn description(&self) -> &'static str {
        "symmetry-aware RMS surface displacement (closed form)"
    }
}

impl PoseMeasure for PoseDistance {
    fn measure(&self, a: &Pose, b: &Pose, object: &ObjectModel) -> Result<f64, MetricError> {
        Ok(metric::distance(a, b, object))
    }
}

/// Sample-based evaluation on the mesh vertices.
#[derive(Debug, Default, Clone, Copy)]
pub struct BruteForceDistance;

impl Named for BruteForceDistance {
    fn name(&self) -> &'static str {
        "pose-bruteforce"
    }
    fn description(&self) -> &'static str {
        "RMS vertex displacement minimized over the symmetry group by search"
    }
}

impl PoseMeasure for BruteForceDistance {
    fn measure(&self, a: &Pose, b: &Pose, object: &ObjectModel) -> Result<f64, MetricError> {
        metric::distance_bruteforce(a, b, object, object.mesh().vertices())
    }
}

/// ADI in a fixed direction.
#[derive(Debug, Clone, Copy)]
pub struct Adi(pub AdiDirection);

impl Named for Adi {
    fn name(&self) -> &'static str {
        match self.0 {
            AdiDirection::Forward => "adi",
            AdiDirection::Reverse => "adi-reverse",
            AdiDirection::Symmetric => "adi-symmetric",
        }
    }
    fn description(&self) -> &'static str {
        match self.0 {
            AdiDirection::Forward => "mean closest-vertex distance, first pose to second",
            AdiDirection::Reverse => "mean closest-vertex distance, second pose to first",
            AdiDirection::Symmetric => "larger of the two closest-vertex directions",
        }
    }
}

impl PoseMeasure for Adi {
    fn measure(&self, a: &Pose, b: &Pose, object: &ObjectModel) -> Result<f64, MetricError> {
        metric::adi(a, b, object.mesh(), self.0, None)
    }
}

impl Registry<dyn PoseMeasure> {
    pub fn with_builtin_measures() -> Self {
        let mut r = Self::empty("measure");
        let builtins: Vec<Box<dyn PoseMeasure>> = vec![
            Box::new(PoseDistance),
            Box::new(BruteForceDistance),
            Box::new(Adi(AdiDirection::Forward)),
            Box::new(Adi(AdiDirection::Reverse)),
            Box::new(Adi(AdiDirection::Symmetric)),
        ];
        for b in builtins {
            r.register(b).expect("builtin names are unique");
        }
        r
    }
}

/// A radially symmetric kernel with compact support on the bandwidth.
///
/// Both functions take the squared normalized distance `u² = (d / h)²` and are
/// only evaluated for `u² <= 1`.
pub trait Kernel: Named + Send + Sync {
    /// Density contribution of one unit-weight sample.
    fn profile(&self, u2: f64) -> f64;
    /// Weight of a sample in the mean-shift update; the negated derivative of
    /// [`Kernel::profile`] with respect to `u²`, up to a constant factor.
    fn shift_weight(&self, u2: f64) -> f64;
}

pub type KernelRegistry = Registry<dyn Kernel>;

#[derive(Debug, Default, Clone, Copy)]
pub struct Epanechnikov;

impl Named for Epanechnikov {
    fn name(&self) -> &'static str {
        "epanechnikov"
    }
    fn description(&self) -> &'static str {
        "1 - u² on the unit ball; flat mean-shift weights"
    }
}

impl Kernel for Epanechnikov {
    fn profile(&self, u2: f64) -> f64 {
        (1.0 - u2).max(0.0)
    }
    fn shift_weight(&self, u2: f64) -> f64 {
        if u2 <= 1.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Gaussian with `σ = h / 3`, truncated at the bandwidth.
#[derive(Debug, Default, Clone, Copy)]
pub struct TruncatedGaussian;

impl Named for TruncatedGaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn description(&self) -> &'static str {
        "exp(-9u²/2), i.e. sigma = bandwidth / 3, truncated at the bandwidth"
    }
}

impl Kernel for TruncatedGaussian {
    fn profile(&self, u2: f64) -> f64 {
        if u2 <= 1.0 {
            (-4.5 * u2).exp()
        } else {
            0.0
        }
    }
    fn shift_weight(&self, u2: f64) -> f64 {
        self.profile(u2)
    }
}

impl Registry<dyn Kernel> {
    pub fn with_builtin_kernels() -> Self {
        let mut r = Self::empty("kernel");
        r.register(Box::new(Epanechnikov)).expect("unique");
        r.register(Box::new(TruncatedGaussian)).expect("unique");
        r
    }
}
