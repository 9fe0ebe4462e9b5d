//! Symmetry-aware evaluation of 6D object pose estimation.
//!
//! The crate covers object models with their proper symmetry groups, a pose
//! distance that respects those symmetries, Euclidean-style operations in pose
//! space (indexing, averaging, mean shift, duplicate filtering), a
//! precision/recall methodology for scenes with many instances, a multiview PnP
//! solver for ground-truth annotation, and synthetic scene generation.

pub mod config;
pub mod eval;
pub mod formats;
pub mod kdtree;
pub mod mesh;
pub mod metric;
pub mod object;
pub mod pnp;
pub mod pose;
pub mod pose_space;
pub mod registry;
pub mod rotation;
pub mod scene;
pub mod shapes;
pub mod symmetry;

pub use mesh::{MeshError, TriangleMesh};
pub use metric::{distance, representatives, RepresentativeSet};
pub use object::{load_object, load_object_descriptor, ObjectError, ObjectModel};
pub use pose::{Pose, PoseError};
pub use pose_space::{PoseIndex, PoseSpaceError, ScoredPose};
pub use symmetry::{ProperSymmetryGroup, SymmetryClass};
