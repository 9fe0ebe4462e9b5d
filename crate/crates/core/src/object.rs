//! Object models: a re-centered mesh, its symmetry group, and the derived geometry
//! (`Λ`, `λ`, diameter) that pose distances are built on.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::DEFAULT_DELTA_FRACTION;
use crate::mesh::{MeshError, TriangleMesh};
use crate::pose::Pose;
use crate::symmetry::{ProperSymmetryGroup, SymmetryClass, SymmetryDescriptor, SymmetryError};

/// Relative tolerance (to `trace Λ`) for the axial-symmetry and group-consistency checks.
pub const AXIAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid object descriptor: {0}")]
    Descriptor(String),
    #[error("second-moment matrix has a negative eigenvalue {0:e}")]
    NegativeMoment(f64),
    #[error("lambda matrix is not symmetric")]
    AsymmetricLambda,
    #[error("revolution object is not axially symmetric about z (deviation {0:e} of trace)")]
    NotAxial(f64),
    #[error("symmetry element {index} does not preserve the surface moments (deviation {deviation:e} of trace)")]
    GroupInconsistent { index: usize, deviation: f64 },
}

/// Principal square root of a symmetric PSD matrix via its eigendecomposition.
///
/// Eigenvalues in `[-1e-12·|trace|, 0)` are treated as zero; anything more negative
/// is rejected.
pub fn sqrt_psd(m: &Matrix3<f64>) -> Result<Matrix3<f64>, ObjectError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let floor = -1e-12 * sym.trace().abs();
    let mut roots = Vector3::zeros();
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < floor {
            return Err(ObjectError::NegativeMoment(ev));
        }
        roots[i] = ev.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    let root = q * Matrix3::from_diagonal(&roots) * q.transpose();
    Ok((root + root.transpose()) * 0.5)
}

/// `Λ = ((1/S) ∫ x xᵀ ds)^{1/2}` for a mesh already expressed about its surface centroid.
pub fn compute_lambda(mesh: &TriangleMesh) -> Result<Matrix3<f64>, ObjectError> {
    sqrt_psd(&mesh.second_moment()?)
}

/// Area-weighted centroid of the mesh surface.
pub fn surface_centroid(mesh: &TriangleMesh) -> Result<Point3<f64>, ObjectError> {
    Ok(mesh.surface_centroid()?)
}

/// An immutable rigid-object model in its centered frame.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    mesh: TriangleMesh,
    group: ProperSymmetryGroup,
    lambda: Matrix3<f64>,
    lambda_scalar: Option<f64>,
    diameter: f64,
    origin_offset: Vector3<f64>,
    units: String,
}

impl ObjectModel {
    /// Re-centers `mesh` on its surface centroid and derives `Λ`, `λ` and the diameter.
    pub fn new(mesh: TriangleMesh, group: ProperSymmetryGroup) -> Result<Self, ObjectError> {
        let centroid = mesh.surface_centroid()?;
        let mesh = mesh.translated(&-centroid.coords);
        let lambda = compute_lambda(&mesh)?;
        let diameter = 2.0 * mesh.max_radius(&Point3::origin());
        let mut model = Self {
            mesh,
            group,
            lambda,
            lambda_scalar: None,
            diameter,
            origin_offset: centroid.coords,
            units: "m".to_string(),
        };
        model.check_lambda()?;
        Ok(model)
    }

    /// Replaces `Λ` (for instance by a vertex-based estimate) and re-runs the
    /// consistency checks.
    pub fn with_lambda(mut self, lambda: Matrix3<f64>) -> Result<Self, ObjectError> {
        if (lambda - lambda.transpose()).abs().max() > 1e-12 * lambda.abs().max() {
            return Err(ObjectError::AsymmetricLambda);
        }
        let eig = SymmetricEigen::new(lambda);
        let min = eig.eigenvalues.min();
        if min < -1e-12 * lambda.trace().abs() {
            return Err(ObjectError::NegativeMoment(min));
        }
        self.lambda = lambda;
        self.check_lambda()?;
        Ok(self)
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    fn check_lambda(&mut self) -> Result<(), ObjectError> {
        let l = &self.lambda;
        let scale = l.trace().abs().max(f64::MIN_POSITIVE);
        match self.group.class() {
            SymmetryClass::Revolution | SymmetryClass::RevolutionRotoreflection => {
                let dev = [l[(0, 1)], l[(0, 2)], l[(1, 2)], l[(0, 0)] - l[(1, 1)]]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
                    / scale;
                if dev > AXIAL_TOLERANCE {
                    return Err(ObjectError::NotAxial(dev));
                }
                let radial = 0.5 * (l[(0, 0)] + l[(1, 1)]);
                self.lambda_scalar = Some((radial * radial + l[(2, 2)] * l[(2, 2)]).sqrt());
            }
            SymmetryClass::Finite => {
                for (index, g) in self.group.rotations().iter().enumerate() {
                    let deviation = (g * l * g.transpose() - l).abs().max() / scale;
                    if deviation > AXIAL_TOLERANCE {
                        return Err(ObjectError::GroupInconsistent { index, deviation });
                    }
                }
                self.lambda_scalar = None;
            }
            SymmetryClass::Spherical => self.lambda_scalar = None,
        }
        Ok(())
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn group(&self) -> &ProperSymmetryGroup {
        &self.group
    }

    pub fn class(&self) -> SymmetryClass {
        self.group.class()
    }

    pub fn lambda(&self) -> &Matrix3<f64> {
        &self.lambda
    }

    /// `λ = √(λ_r² + λ_z²)`, revolution classes only.
    pub fn lambda_scalar(&self) -> Option<f64> {
        self.lambda_scalar
    }

    /// Twice the largest vertex distance to the surface centroid.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Surface centroid expressed in the frame the mesh was supplied in.
    pub fn origin_offset(&self) -> &Vector3<f64> {
        &self.origin_offset
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    /// Default match threshold: a tenth of the diameter.
    pub fn default_delta(&self) -> f64 {
        DEFAULT_DELTA_FRACTION * self.diameter
    }

    /// Converts a pose of the mesh as supplied into a pose of the centered model.
    pub fn pose_from_original_frame(&self, pose: &Pose) -> Pose {
        Pose::new_unchecked(
            *pose.rotation(),
            pose.translation() + pose.rotation() * self.origin_offset,
        )
    }

    pub fn pose_to_original_frame(&self, pose: &Pose) -> Pose {
        Pose::new_unchecked(
            *pose.rotation(),
            pose.translation() - pose.rotation() * self.origin_offset,
        )
    }
}

/// Object descriptor file contents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    /// Mesh path, relative to the descriptor's directory unless absolute.
    pub mesh: PathBuf,
    #[serde(default = "default_units")]
    pub units: String,
    pub symmetry: SymmetryDescriptor,
}

fn default_units() -> String {
    "m".to_string()
}

/// Loads a mesh file and builds the model for the given symmetry.
pub fn load_object(
    mesh_file: impl AsRef<Path>,
    symmetry: &SymmetryDescriptor,
) -> Result<ObjectModel, ObjectError> {
    let group = ProperSymmetryGroup::from_descriptor(symmetry)?;
    let mesh = TriangleMesh::load(mesh_file)?;
    ObjectModel::new(mesh, group)
}

/// Loads an object from its JSON descriptor file.
pub fn load_object_descriptor(path: impl AsRef<Path>) -> Result<ObjectModel, ObjectError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ObjectError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let desc: ObjectDescriptor =
        serde_json::from_str(&text).map_err(|e| ObjectError::Descriptor(e.to_string()))?;
    let mesh_path = if desc.mesh.is_absolute() {
        desc.mesh.clone()
    } else {
        path.parent().unwrap_or(Path::new(".")).join(&desc.mesh)
    };
    Ok(load_object(&mesh_path, &desc.symmetry)?.with_units(desc.units))
}
