//! Rigid poses `x ↦ R x + t`.
//!
//! A [`Pose`] stores a single transformation. Its symmetry class is never
//! canonicalized here; equivalence under the object's group is handled by the
//! distance in [`crate::metric`].

use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotation::{self, rotation_error};

/// Orthonormality tolerance of a stored rotation.
pub const POSE_TOLERANCE: f64 = 1e-9;

/// Parsed rotations further than this from SO(3) are rejected instead of projected.
pub const PARSE_PROJECTION_LIMIT: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("rotation is not orthonormal with det +1 (error {0:e})")]
    NotARotation(f64),
    #[error("non-finite pose entry")]
    NonFinite,
    #[error("expected 12 values (9 rotation + 3 translation), got {0}")]
    WrongLength(usize),
    #[error("cannot parse pose value '{0}'")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PoseError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        let err = rotation_error(&rotation);
        if err > POSE_TOLERANCE {
            return Err(PoseError::NotARotation(err));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips validation; callers guarantee `rotation` is a proper rotation.
    pub fn new_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new_unchecked(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new_unchecked(Matrix3::identity(), t)
    }

    /// Uniform rotation and a translation uniform in `[-extent, extent]³`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, extent: f64) -> Self {
        let t = Vector3::from_fn(|_, _| {
            if extent > 0.0 {
                rng.random_range(-extent..extent)
            } else {
                0.0
            }
        });
        Self::new_unchecked(rotation::random_rotation(rng), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, x: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * x.coords + self.translation)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// `self ∘ G` for an object-frame rotation `G` (such as a symmetry element).
    pub fn with_object_rotation(&self, g: &Matrix3<f64>) -> Pose {
        Pose::new_unchecked(self.rotation * g, self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new_unchecked(rt, -(rt * self.translation))
    }

    /// Row-major rotation followed by translation.
    pub fn to_array(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
            t.x, t.y, t.z,
        ]
    }

    /// Inverse of [`Pose::to_array`]. Rotations within [`PARSE_PROJECTION_LIMIT`] of
    /// SO(3) are projected onto it; exact rotations pass through bit-for-bit.
    pub fn from_slice(values: &[f64]) -> Result<Self, PoseError> {
        if values.len() != 12 {
            return Err(PoseError::WrongLength(values.len()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        let r = Matrix3::from_row_slice(&values[..9]);
        let t = Vector3::new(values[9], values[10], values[11]);
        let err = rotation_error(&r);
        if err <= POSE_TOLERANCE {
            return Ok(Self::new_unchecked(r, t));
        }
        if err > PARSE_PROJECTION_LIMIT {
            return Err(PoseError::NotARotation(err));
        }
        let projected = rotation::nearest_rotation(&r).ok_or(PoseError::NotARotation(err))?;
        Self::new(projected, t)
    }

    pub fn from_rt(r: &[f64], t: &[f64]) -> Result<Self, PoseError> {
        let mut all = r.to_vec();
        all.extend_from_slice(t);
        if r.len() != 9 || t.len() != 3 {
            return Err(PoseError::WrongLength(all.len()));
        }
        Self::from_slice(&all)
    }

    /// Comma-separated row of the 12 values, shortest round-trip formatting.
    pub fn to_csv_row(&self) -> String {
        self.to_array()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self, PoseError> {
        let values = row
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>().map_err(|_| PoseError::Parse(s.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_slice(&values)
    }
}

impl TryFrom<Vec<f64>> for Pose {
    type Error = PoseError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Pose::from_slice(&v)
    }
}

impl From<Pose> for Vec<f64> {
    fn from(p: Pose) -> Self {
        p.to_array().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_non_rotations() {
        let scaled = Matrix3::identity() * 1.1;
        assert!(matches!(
            Pose::new(scaled, Vector3::zeros()),
            Err(PoseError::NotARotation(_))
        ));
        let mirror = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(mirror, Vector3::zeros()).is_err());
        assert!(matches!(Pose::from_slice(&[0.0; 5]), Err(PoseError::WrongLength(5))));
    }

    #[test]
    fn slightly_noisy_rotation_projected() {
        let mut v = Pose::identity().to_array();
        v[1] = 1e-8;
        let p = Pose::from_slice(&v).unwrap();
        assert!(rotation_error(p.rotation()) < 1e-12);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = Pose::random(&mut rng, 2.0);
        let id = p.compose(&p.inverse());
        assert!((id.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn json_and_csv_roundtrip_exactly(seed in any::<u64>(), extent in 0.0f64..1e3) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = Pose::random(&mut rng, extent);
            let json = serde_json::to_string(&p).unwrap();
            let back: Pose = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back.to_array(), p.to_array());
            let csv = Pose::from_csv_row(&p.to_csv_row()).unwrap();
            prop_assert_eq!(csv.to_array(), p.to_array());
        }
    }
}
