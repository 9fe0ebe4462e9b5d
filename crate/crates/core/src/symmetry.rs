//! Proper symmetry groups of rigid objects.
//!
//! Four classes cover every bounded object: finite subgroups of SO(3), revolution
//! about the object z axis, revolution combined with a half-turn flipping that axis,
//! and full spherical symmetry. Only the finite class carries an explicit element list.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rotation::{self, max_abs_diff, rot_x, rot_z};

/// Tolerance used when validating group axioms.
pub const GROUP_TOLERANCE: f64 = 1e-9;

const MAX_FINITE_ORDER: usize = 120;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    Finite,
    Revolution,
    RevolutionRotoreflection,
    Spherical,
}

impl SymmetryClass {
    pub fn is_revolution(self) -> bool {
        matches!(
            self,
            SymmetryClass::Revolution | SymmetryClass::RevolutionRotoreflection
        )
    }
}

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("rotation list is not a proper symmetry group: {0}")]
    NotAGroup(GroupCheck),
    #[error("generators do not close into a finite group of order <= {MAX_FINITE_ORDER}")]
    Unbounded,
    #[error("invalid symmetry descriptor: {0}")]
    InvalidDescriptor(String),
}

/// One way a rotation list can fail the group axioms.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupProblem {
    Empty,
    NotOrthogonal(usize),
    NotProper(usize),
    MissingIdentity,
    Duplicate(usize, usize),
    NotClosed(usize, usize),
    MissingInverse(usize),
}

/// Diagnostics from [`validate_group`]; valid when no problem was found.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupCheck {
    pub problems: Vec<GroupProblem>,
}

impl GroupCheck {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

impl std::fmt::Display for GroupCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .problems
            .iter()
            .map(|p| match p {
                GroupProblem::Empty => "empty list".to_string(),
                GroupProblem::NotOrthogonal(i) => format!("element {i} is not orthogonal"),
                GroupProblem::NotProper(i) => format!("element {i} has determinant -1"),
                GroupProblem::MissingIdentity => "identity missing".to_string(),
                GroupProblem::Duplicate(i, j) => format!("elements {i} and {j} coincide"),
                GroupProblem::NotClosed(i, j) => {
                    format!("product of elements {i} and {j} is not in the list")
                }
                GroupProblem::MissingInverse(i) => format!("inverse of element {i} missing"),
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

fn position(list: &[Matrix3<f64>], m: &Matrix3<f64>, tol: f64) -> Option<usize> {
    list.iter().position(|g| max_abs_diff(g, m) <= tol)
}

/// Checks the group axioms (identity, closure, inverses) and that every element
/// is a proper rotation, all up to `tol` in max-abs entry difference.
pub fn validate_group(rotations: &[Matrix3<f64>], tol: f64) -> GroupCheck {
    let mut problems = Vec::new();
    if rotations.is_empty() {
        problems.push(GroupProblem::Empty);
        return GroupCheck { problems };
    }
    for (i, r) in rotations.iter().enumerate() {
        if max_abs_diff(&(r.transpose() * r), &Matrix3::identity()) > tol {
            problems.push(GroupProblem::NotOrthogonal(i));
        } else if (r.determinant() - 1.0).abs() > tol {
            problems.push(GroupProblem::NotProper(i));
        }
    }
    if position(rotations, &Matrix3::identity(), tol).is_none() {
        problems.push(GroupProblem::MissingIdentity);
    }
    for i in 0..rotations.len() {
        for j in (i + 1)..rotations.len() {
            if max_abs_diff(&rotations[i], &rotations[j]) <= tol {
                problems.push(GroupProblem::Duplicate(i, j));
            }
        }
    }
    for (i, a) in rotations.iter().enumerate() {
        if position(rotations, &a.transpose(), tol).is_none() {
            problems.push(GroupProblem::MissingInverse(i));
        }
        for (j, b) in rotations.iter().enumerate() {
            if position(rotations, &(a * b), tol).is_none() {
                problems.push(GroupProblem::NotClosed(i, j));
            }
        }
    }
    GroupCheck { problems }
}

/// A proper symmetry group with the symmetry axis (when any) along object z.
#[derive(Clone, Debug, PartialEq)]
pub struct ProperSymmetryGroup {
    class: SymmetryClass,
    rotations: Vec<Matrix3<f64>>,
}

impl ProperSymmetryGroup {
    /// Finite group from an explicit element list, validated at [`GROUP_TOLERANCE`].
    pub fn finite(rotations: Vec<Matrix3<f64>>) -> Result<Self, SymmetryError> {
        let check = validate_group(&rotations, GROUP_TOLERANCE);
        if !check.is_valid() {
            return Err(SymmetryError::NotAGroup(check));
        }
        Ok(Self {
            class: SymmetryClass::Finite,
            rotations,
        })
    }

    /// Smallest group containing `generators`, built by repeated multiplication.
    pub fn from_generators(generators: &[Matrix3<f64>]) -> Result<Self, SymmetryError> {
        let tol = 1e-7;
        let mut elements = vec![Matrix3::identity()];
        let mut frontier = vec![Matrix3::identity()];
        while let Some(g) = frontier.pop() {
            for h in generators {
                let p = snap(rotation::nearest_rotation(&(g * h)).ok_or(SymmetryError::Unbounded)?);
                if position(&elements, &p, tol).is_none() {
                    if elements.len() == MAX_FINITE_ORDER {
                        return Err(SymmetryError::Unbounded);
                    }
                    elements.push(p);
                    frontier.push(p);
                }
            }
        }
        Self::finite(elements)
    }

    pub fn trivial() -> Self {
        Self {
            class: SymmetryClass::Finite,
            rotations: vec![Matrix3::identity()],
        }
    }

    /// Cyclic group of order `n` about z.
    pub fn cyclic(n: usize) -> Result<Self, SymmetryError> {
        if n == 0 {
            return Err(SymmetryError::InvalidDescriptor(
                "cyclic order must be >= 1".into(),
            ));
        }
        Self::finite(cyclic_elements(n))
    }

    /// Dihedral group of order `2n`: the cyclic group about z plus half-turns about
    /// axes in the xy plane.
    pub fn dihedral(n: usize) -> Result<Self, SymmetryError> {
        if n == 0 {
            return Err(SymmetryError::InvalidDescriptor(
                "dihedral order must be >= 1".into(),
            ));
        }
        let cyc = cyclic_elements(n);
        let flip = snap(rot_x(PI));
        let mut all = cyc.clone();
        all.extend(cyc.iter().map(|g| flip * g));
        Self::finite(all)
    }

    /// Rotation group of the regular tetrahedron (order 12).
    pub fn tetrahedral() -> Self {
        let three_fold = rotation::exp_so3(&(Vector3::new(1.0, 1.0, 1.0).normalize() * (2.0 * PI / 3.0)));
        Self::from_generators(&[rot_z(PI), rot_x(PI), three_fold]).expect("tetrahedral group")
    }

    /// Rotation group of the cube (order 24).
    pub fn octahedral() -> Self {
        Self::from_generators(&[rot_z(PI / 2.0), rot_x(PI / 2.0)]).expect("octahedral group")
    }

    /// Rotation group of the icosahedron (order 60), oriented to match
    /// [`crate::shapes::icosahedron`].
    pub fn icosahedral() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let five_fold = rotation::exp_so3(&(Vector3::new(0.0, 1.0, phi).normalize() * (2.0 * PI / 5.0)));
        Self::from_generators(&[five_fold, rot_z(PI), rot_x(PI)]).expect("icosahedral group")
    }

    pub fn revolution() -> Self {
        Self {
            class: SymmetryClass::Revolution,
            rotations: Vec::new(),
        }
    }

    pub fn revolution_rotoreflection() -> Self {
        Self {
            class: SymmetryClass::RevolutionRotoreflection,
            rotations: Vec::new(),
        }
    }

    pub fn spherical() -> Self {
        Self {
            class: SymmetryClass::Spherical,
            rotations: Vec::new(),
        }
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    /// Explicit elements; empty for the continuous classes.
    pub fn rotations(&self) -> &[Matrix3<f64>] {
        &self.rotations
    }

    /// Group order for the finite class.
    pub fn order(&self) -> Option<usize> {
        (self.class == SymmetryClass::Finite).then_some(self.rotations.len())
    }

    /// Draws an element of the group (uniformly for the finite class).
    pub fn sample_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix3<f64> {
        match self.class {
            SymmetryClass::Finite => self.rotations[rng.random_range(0..self.rotations.len())],
            SymmetryClass::Revolution => rot_z(rng.random_range(-PI..PI)),
            SymmetryClass::RevolutionRotoreflection => {
                let flip = if rng.random_bool(0.5) { rot_x(PI) } else { Matrix3::identity() };
                flip * rot_z(rng.random_range(-PI..PI))
            }
            SymmetryClass::Spherical => rotation::random_rotation(rng),
        }
    }

    /// Builds a group from its JSON descriptor.
    pub fn from_descriptor(desc: &SymmetryDescriptor) -> Result<Self, SymmetryError> {
        let bad = |m: &str| Err(SymmetryError::InvalidDescriptor(m.to_string()));
        if let Some(axis) = desc.axis.as_deref() {
            if !axis.eq_ignore_ascii_case("z") {
                return bad("symmetry axis must be the object z axis");
            }
        }
        match desc.class {
            SymmetryClass::Finite => {
                let given = [
                    desc.rotations.is_some(),
                    desc.cyclic_order.is_some(),
                    desc.dihedral_order.is_some(),
                    desc.named.is_some(),
                ]
                .iter()
                .filter(|&&b| b)
                .count();
                if given > 1 {
                    return bad("give only one of rotations, cyclic_order, dihedral_order, named");
                }
                if let Some(list) = &desc.rotations {
                    let mats = list
                        .iter()
                        .map(RotationSpec::to_matrix)
                        .collect::<Result<Vec<_>, _>>()?;
                    Self::finite(mats)
                } else if let Some(n) = desc.cyclic_order {
                    Self::cyclic(n)
                } else if let Some(n) = desc.dihedral_order {
                    Self::dihedral(n)
                } else if let Some(name) = desc.named.as_deref() {
                    match name {
                        "tetrahedral" => Ok(Self::tetrahedral()),
                        "octahedral" => Ok(Self::octahedral()),
                        "icosahedral" => Ok(Self::icosahedral()),
                        other => bad(&format!("unknown named group '{other}'")),
                    }
                } else {
                    Ok(Self::trivial())
                }
            }
            class => {
                if desc.rotations.is_some()
                    || desc.cyclic_order.is_some()
                    || desc.dihedral_order.is_some()
                    || desc.named.is_some()
                {
                    return bad("continuous symmetry classes take no explicit elements");
                }
                Ok(match class {
                    SymmetryClass::Revolution => Self::revolution(),
                    SymmetryClass::RevolutionRotoreflection => Self::revolution_rotoreflection(),
                    _ => Self::spherical(),
                })
            }
        }
    }
}

fn cyclic_elements(n: usize) -> Vec<Matrix3<f64>> {
    (0..n)
        .map(|k| snap(rot_z(2.0 * PI * k as f64 / n as f64)))
        .collect()
}

/// Rounds entries within 1e-14 of 0 or ±1 so that half- and quarter-turns are exact.
fn snap(mut m: Matrix3<f64>) -> Matrix3<f64> {
    for v in m.iter_mut() {
        for target in [-1.0, 0.0, 1.0] {
            if (*v - target).abs() < 1e-14 {
                *v = target;
            }
        }
    }
    m
}

/// One rotation in a descriptor: 9 row-major entries, 3 rows, or a `(w, x, y, z)`
/// quaternion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Matrix([f64; 9]),
    Rows([[f64; 3]; 3]),
    Quaternion([f64; 4]),
}

impl RotationSpec {
    pub fn to_matrix(&self) -> Result<Matrix3<f64>, SymmetryError> {
        match self {
            RotationSpec::Matrix(m) => Ok(Matrix3::from_row_slice(m)),
            RotationSpec::Rows(r) => Ok(Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            )),
            RotationSpec::Quaternion(q) => rotation::from_quaternion(*q)
                .ok_or_else(|| SymmetryError::InvalidDescriptor("zero quaternion".into())),
        }
    }
}

/// The `symmetry` block of an object descriptor file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDescriptor {
    pub class: SymmetryClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<Vec<RotationSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dihedral_order: Option<usize>,
    /// `tetrahedral`, `octahedral` or `icosahedral`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
}

impl SymmetryDescriptor {
    pub fn of_class(class: SymmetryClass) -> Self {
        Self {
            class,
            rotations: None,
            cyclic_order: None,
            dihedral_order: None,
            named: None,
            axis: None,
        }
    }

    pub fn cyclic(n: usize) -> Self {
        Self {
            cyclic_order: Some(n),
            ..Self::of_class(SymmetryClass::Finite)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_groups() {
        assert!(validate_group(&[Matrix3::identity()], 1e-9).is_valid());
        assert!(validate_group(&[Matrix3::identity(), rot_z(PI)], 1e-9).is_valid());
        let open = validate_group(&[Matrix3::identity(), rot_z(2.0 * PI / 3.0)], 1e-9);
        assert!(!open.is_valid());
        assert!(open.problems.contains(&GroupProblem::MissingInverse(1)));
        let quarter = validate_group(&[Matrix3::identity(), rot_z(PI / 2.0)], 1e-9);
        assert!(quarter.problems.contains(&GroupProblem::NotClosed(1, 1)));
    }

    #[test]
    fn improper_and_missing_identity_detected() {
        let mirror = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let check = validate_group(&[Matrix3::identity(), mirror], 1e-9);
        assert!(check.problems.contains(&GroupProblem::NotProper(1)));
        let check = validate_group(&[rot_z(PI)], 1e-9);
        assert!(check.problems.contains(&GroupProblem::MissingIdentity));
        assert_eq!(validate_group(&[], 1e-9).problems, vec![GroupProblem::Empty]);
    }

    #[test]
    fn cyclic_helper_valid_up_to_24() {
        for n in 1..=24 {
            let g = ProperSymmetryGroup::cyclic(n).unwrap();
            assert_eq!(g.order(), Some(n));
            assert!(validate_group(g.rotations(), GROUP_TOLERANCE).is_valid());
        }
    }

    #[test]
    fn polyhedral_orders() {
        assert_eq!(ProperSymmetryGroup::tetrahedral().order(), Some(12));
        assert_eq!(ProperSymmetryGroup::octahedral().order(), Some(24));
        assert_eq!(ProperSymmetryGroup::icosahedral().order(), Some(60));
        assert_eq!(ProperSymmetryGroup::dihedral(4).unwrap().order(), Some(8));
    }

    #[test]
    fn icosahedral_group_preserves_icosahedron() {
        let mesh = crate::shapes::icosahedron(1.0);
        for g in ProperSymmetryGroup::icosahedral().rotations() {
            for v in mesh.vertices() {
                let w = g * v.coords;
                assert!(mesh.vertices().iter().any(|u| (u.coords - w).norm() < 1e-9));
            }
        }
    }

    #[test]
    fn descriptor_parsing() {
        let d: SymmetryDescriptor =
            serde_json::from_str(r#"{"class":"finite","cyclic_order":2,"axis":"z"}"#).unwrap();
        assert_eq!(ProperSymmetryGroup::from_descriptor(&d).unwrap().order(), Some(2));

        let d: SymmetryDescriptor = serde_json::from_str(
            r#"{"class":"finite","rotations":[[1,0,0,0],[0,0,0,1]]}"#,
        )
        .unwrap();
        assert_eq!(ProperSymmetryGroup::from_descriptor(&d).unwrap().order(), Some(2));

        let d: SymmetryDescriptor = serde_json::from_str(
            r#"{"class":"finite","rotations":[[1,0,0,0,1,0,0,0,1],[0,-1,0,1,0,0,0,0,1]]}"#,
        )
        .unwrap();
        assert!(matches!(
            ProperSymmetryGroup::from_descriptor(&d),
            Err(SymmetryError::NotAGroup(_))
        ));

        let d: SymmetryDescriptor =
            serde_json::from_str(r#"{"class":"revolution","cyclic_order":3}"#).unwrap();
        assert!(ProperSymmetryGroup::from_descriptor(&d).is_err());
        let d: SymmetryDescriptor =
            serde_json::from_str(r#"{"class":"finite","cyclic_order":3,"axis":"x"}"#).unwrap();
        assert!(ProperSymmetryGroup::from_descriptor(&d).is_err());
    }
}
