//! Small SO(3) helpers shared across modules.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), angle).into_inner()
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), angle).into_inner()
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner()
}

/// Exponential map: rotation by `|w|` about `w / |w|`.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Rotation vector of `r` (inverse of [`exp_so3`]).
///
/// Goes through the quaternion so that small angles keep full relative
/// precision (an `acos` of the trace would not).
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let (w, v) = if q.w < 0.0 { (-q.w, -q.vector()) } else { (q.w, q.vector().into_owned()) };
    let n = v.norm();
    if n == 0.0 {
        return Vector3::zeros();
    }
    v * (2.0 * n.atan2(w) / n)
}

/// Uniformly distributed rotation, drawn as a normalized Gaussian 4-vector.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q)
                .to_rotation_matrix()
                .into_inner();
        }
    }
}

/// Rotation from a `(w, x, y, z)` quaternion, normalized first.
pub fn from_quaternion(wxyz: [f64; 4]) -> Option<Matrix3<f64>> {
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    if !(q.norm() > 0.0) {
        return None;
    }
    Some(
        UnitQuaternion::from_quaternion(q)
            .to_rotation_matrix()
            .into_inner(),
    )
}

/// Closest rotation in Frobenius norm, `None` when the input has rank < 2.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut s = svd.singular_values;
    s.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(s[1] > 1e-12 * s[0].max(f64::MIN_POSITIVE)) {
        return None;
    }
    let d = (u * v_t).determinant().signum();
    Some(u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t)
}

/// Some rotation `R` with `R e_z = axis / |axis|`.
pub fn rotation_aligning_z(axis: &Vector3<f64>) -> Matrix3<f64> {
    let u = axis.normalize();
    let ez = Vector3::z();
    let c = ez.dot(&u);
    if c < -1.0 + 1e-12 {
        return rot_x(std::f64::consts::PI);
    }
    Rotation3::rotation_between(&ez, &u)
        .map(|r| r.into_inner())
        .unwrap_or_else(Matrix3::identity)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).abs().max()
}

/// Largest deviation of `r` from orthonormality and unit determinant.
pub fn rotation_error(r: &Matrix3<f64>) -> f64 {
    max_abs_diff(&(r.transpose() * r), &Matrix3::identity()).max((r.determinant() - 1.0).abs())
}
