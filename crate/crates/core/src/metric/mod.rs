//! Symmetry-aware pose distance.
//!
//! Each pose is embedded as a finite point set whose size and dimension depend on
//! the symmetry class of the object:
//!
//! | class                          | points                         | dim |
//! |--------------------------------|--------------------------------|-----|
//! | finite group `G`               | `vec(R G Λ) ⊕ t` for each `G`  | 12  |
//! | revolution                     | `λ R e_z ⊕ t`                  | 6   |
//! | revolution with rotoreflection | `±λ R e_z ⊕ t`                 | 6   |
//! | spherical                      | `t`                            | 3   |
//!
//! `vec` flattens row-major. The distance between two poses is the Euclidean
//! distance from any one point of the first set to the nearest point of the
//! second, which equals the RMS displacement of surface points minimized over
//! the symmetry group.

mod adi;
mod bruteforce;

pub use adi::{adi, adi_dissimilarity, AdiDirection};
pub use bruteforce::{discrete_lambda, distance_bruteforce, REVOLUTION_GRID_STEPS};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::object::ObjectModel;
use crate::pose::Pose;
use crate::symmetry::SymmetryClass;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("sample set is empty")]
    EmptySamples,
    #[error("mesh has no vertices")]
    EmptyMesh,
}

/// Squared Euclidean distance between two equally long slices.
///
/// Every distance in the crate goes through this one routine so that index
/// queries and linear scans agree bit-for-bit.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Representative dimension for a symmetry class.
pub fn representative_dim(class: SymmetryClass) -> usize {
    match class {
        SymmetryClass::Finite => 12,
        SymmetryClass::Revolution | SymmetryClass::RevolutionRotoreflection => 6,
        SymmetryClass::Spherical => 3,
    }
}

/// The finite point set embedding one pose.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentativeSet {
    dim: usize,
    coords: Vec<f64>,
}

impl RepresentativeSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Flat coordinate storage, `len() * dim()` values.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Smallest squared distance from `p` to any point of the set, with its index.
    pub fn nearest_to(&self, p: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points().enumerate() {
            let d = squared_distance(q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

fn push_rotation_block(out: &mut Vec<f64>, m: &Matrix3<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(m[(r, c)]);
        }
    }
}

fn push_vector(out: &mut Vec<f64>, v: &Vector3<f64>) {
    out.extend_from_slice(v.as_slice());
}

/// Builds the representative set of `pose` for `object`.
pub fn representatives(pose: &Pose, object: &ObjectModel) -> RepresentativeSet {
    let class = object.class();
    let dim = representative_dim(class);
    let r = pose.rotation();
    let t = pose.translation();
    let mut coords = Vec::new();
    match class {
        SymmetryClass::Finite => {
            let rotations = object.group().rotations();
            coords.reserve(rotations.len() * dim);
            for g in rotations {
                push_rotation_block(&mut coords, &(r * g * object.lambda()));
                push_vector(&mut coords, t);
            }
        }
        SymmetryClass::Revolution | SymmetryClass::RevolutionRotoreflection => {
            let lambda = object.lambda_scalar().expect("revolution objects carry λ");
            let axis = r.column(2) * lambda;
            push_vector(&mut coords, &axis.into());
            push_vector(&mut coords, t);
            if class == SymmetryClass::RevolutionRotoreflection {
                push_vector(&mut coords, &(-axis).into());
                push_vector(&mut coords, t);
            }
        }
        SymmetryClass::Spherical => push_vector(&mut coords, t),
    }
    RepresentativeSet { dim, coords }
}

/// Pose distance: minimum over `ℛ(b)` of the distance to the first point of `ℛ(a)`.
pub fn distance(a: &Pose, b: &Pose, object: &ObjectModel) -> f64 {
    distance_from(a, 0, b, object)
}

/// As [`distance`], anchoring on point `anchor` of `ℛ(a)` instead of the first.
pub fn distance_from(a: &Pose, anchor: usize, b: &Pose, object: &ObjectModel) -> f64 {
    let ra = representatives(a, object);
    let rb = representatives(b, object);
    rb.nearest_to(ra.point(anchor)).1.sqrt()
}

/// Whether `candidate` matches `reference` under threshold `delta` (strict).
pub fn matches(candidate: &Pose, reference: &Pose, object: &ObjectModel, delta: f64) -> bool {
    distance(candidate, reference, object) < delta
}
