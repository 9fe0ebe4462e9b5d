//! Multiview perspective-n-point: the object pose minimizing the summed squared
//! reprojection error of known object points seen by calibrated pinhole
//! cameras.
//!
//! The pose is refined by Levenberg-Marquardt over a local chart: a rotation
//! increment `ω` applied on the left (`R ← exp(ω) R`) and an additive
//! translation increment. Initialization uses a DLT on the camera with the
//! most correspondences, or several fixed starting orientations when the DLT
//! is unavailable (fewer than six points, or coplanar points).

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix6, SymmetricEigen, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::Pose;
use crate::rotation::{exp_so3, nearest_rotation};
use crate::symmetry::ProperSymmetryGroup;

pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Per-coordinate RMS residual (pixels) above which a solve is reported as
/// diverged.
pub const DEFAULT_DIVERGENCE_RMS: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum PnpError {
    #[error("camera {camera}: {reason}")]
    InvalidCamera { camera: usize, reason: String },
    #[error("{cameras} cameras but correspondences for {lists}")]
    CameraMismatch { cameras: usize, lists: usize },
    #[error("underdetermined: {count} correspondences, at least 3 needed")]
    Underdetermined { count: usize },
    #[error("degenerate correspondences: object points are collinear")]
    Degenerate,
    #[error("non-finite input value")]
    NonFinite,
    #[error("solver diverged: rms residual {rms:.3} px after {iterations} iterations")]
    Diverged {
        pose: Pose,
        rms: f64,
        iterations: usize,
    },
}

fn transform(pose: &Pose, x: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation() * x + pose.translation()
}

/// Pinhole camera without distortion.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraModel {
    k: Matrix3<f64>,
    /// Camera-from-reference transform.
    extrinsics: Pose,
}

impl CameraModel {
    /// `k` must be upper triangular with positive focal entries; it is
    /// normalized so that `k[(2, 2)] = 1`.
    pub fn new(k: Matrix3<f64>, extrinsics: Pose) -> Result<Self, String> {
        if k.iter().any(|v| !v.is_finite()) {
            return Err("intrinsics contain non-finite values".into());
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err("intrinsics must be upper triangular".into());
        }
        if !(k[(2, 2)] > 0.0) {
            return Err("intrinsics must have a positive k33".into());
        }
        let k = k / k[(2, 2)];
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err("focal lengths must be positive".into());
        }
        Ok(Self { k, extrinsics })
    }

    pub fn from_focal(f: f64, cx: f64, cy: f64, extrinsics: Pose) -> Result<Self, String> {
        Self::new(Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0), extrinsics)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn extrinsics(&self) -> &Pose {
        &self.extrinsics
    }

    /// Point in camera coordinates.
    pub fn to_camera(&self, x_ref: &Vector3<f64>) -> Vector3<f64> {
        transform(&self.extrinsics, x_ref)
    }

    /// Pixel of a reference-frame point, or `None` behind the camera.
    pub fn project(&self, x_ref: &Vector3<f64>) -> Option<Vector2<f64>> {
        let z = self.to_camera(x_ref);
        if !(z.z > 0.0) {
            return None;
        }
        let a = self.k * z;
        Some(Vector2::new(a.x / a.z, a.y / a.z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// Point in the object frame.
    pub object: Vector3<f64>,
    /// Observed pixel.
    pub pixel: Vector2<f64>,
}

/// Correspondences per camera; list `j` belongs to camera `j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub per_camera: Vec<Vec<Correspondence>>,
}

impl CorrespondenceSet {
    pub fn new(per_camera: Vec<Vec<Correspondence>>) -> Self {
        Self { per_camera }
    }

    pub fn len(&self) -> usize {
        self.per_camera.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn iter(&self) -> impl Iterator<Item = (usize, &Correspondence)> {
        self.per_camera
            .iter()
            .enumerate()
            .flat_map(|(j, list)| list.iter().map(move |c| (j, c)))
    }

    /// Pre-undistortion hook: maps every observed pixel through `f(camera,
    /// pixel)`, e.g. a lens model inverse, before solving with the pinhole.
    pub fn map_pixels(&self, f: impl Fn(usize, Vector2<f64>) -> Vector2<f64>) -> Self {
        Self {
            per_camera: self
                .per_camera
                .iter()
                .enumerate()
                .map(|(j, list)| {
                    list.iter()
                        .map(|c| Correspondence {
                            pixel: f(j, c.pixel),
                            ..*c
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Reprojection error of one correspondence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub camera: usize,
    pub index: usize,
    /// Projected minus observed pixel; `None` when the point is behind the camera.
    pub error: Option<Vector2<f64>>,
}

pub fn reprojection_residuals(pose: &Pose, corr: &CorrespondenceSet, cams: &[CameraModel]) -> Vec<Residual> {
    corr.per_camera
        .iter()
        .enumerate()
        .flat_map(|(j, list)| {
            list.iter().enumerate().map(move |(i, c)| Residual {
                camera: j,
                index: i,
                error: cams[j].project(&transform(&pose, &c.object)).map(|p| p - c.pixel),
            })
        })
        .collect()
}

/// Stacked residual vector (`2N`) and its Jacobian (`2N × 6`) with respect to
/// the chart `(ω, v)` at `pose`. Rows of points behind a camera are computed
/// from the same formulas and are meaningless there.
pub fn residual_jacobian(
    pose: &Pose,
    corr: &CorrespondenceSet,
    cams: &[CameraModel],
) -> (Vec<f64>, DMatrix<f64>) {
    let n = corr.len();
    let mut r = Vec::with_capacity(2 * n);
    let mut jac = DMatrix::zeros(2 * n, 6);
    for (row, (j, c)) in corr.iter().enumerate() {
        let (res, jr) = point_terms(pose, &cams[j], c);
        r.extend_from_slice(&[res.x, res.y]);
        for k in 0..6 {
            jac[(2 * row, k)] = jr[(0, k)];
            jac[(2 * row + 1, k)] = jr[(1, k)];
        }
    }
    (r, jac)
}

/// Residual and its 2×6 Jacobian for one correspondence.
fn point_terms(
    pose: &Pose,
    cam: &CameraModel,
    c: &Correspondence,
) -> (Vector2<f64>, nalgebra::Matrix2x6<f64>) {
    let rx = pose.rotation() * c.object;
    let y = rx + pose.translation();
    let rc = cam.extrinsics.rotation();
    let z = cam.to_camera(&y);
    let a = cam.k * z;
    let px = Vector2::new(a.x / a.z, a.y / a.z);
    // d pixel / d z_cam
    let k = &cam.k;
    let dp_dz = nalgebra::Matrix2x3::new(
        k[(0, 0)] - px.x * k[(2, 0)],
        k[(0, 1)] - px.x * k[(2, 1)],
        k[(0, 2)] - px.x * k[(2, 2)],
        k[(1, 0)] - px.y * k[(2, 0)],
        k[(1, 1)] - px.y * k[(2, 1)],
        k[(1, 2)] - px.y * k[(2, 2)],
    ) / a.z;
    let dp_dy = dp_dz * rc;
    // d y / d ω = -[R x]×, d y / d v = I
    let dy_dw = -rx.cross_matrix();
    let mut jac = nalgebra::Matrix2x6::zeros();
    jac.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dp_dy * dy_dw));
    jac.fixed_view_mut::<2, 3>(0, 3).copy_from(&dp_dy);
    (px - c.pixel, jac)
}

/// Pose update on the chart.
pub fn retract(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let w = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    Pose::new_unchecked(exp_so3(&w) * pose.rotation(), pose.translation() + v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnpOptions {
    pub init: Option<Pose>,
    pub max_iter: usize,
    pub step_tol: f64,
    pub divergence_rms: f64,
}

impl Default for PnpOptions {
    fn default() -> Self {
        Self {
            init: None,
            max_iter: MAX_ITERATIONS,
            step_tol: STEP_TOLERANCE,
            divergence_rms: DEFAULT_DIVERGENCE_RMS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PnpSolution {
    pub pose: Pose,
    /// Per-coordinate RMS reprojection error, `sqrt(Σ‖r‖² / 2N)`, in pixels.
    pub rms: f64,
    pub iterations: usize,
    /// Half the summed squared residuals after each accepted step, starting
    /// with the initial estimate.
    pub cost_trace: Vec<f64>,
    /// First-order covariance of the chart parameters `(ω, v)`, scaled by the
    /// residual variance estimate. Infinite when `2N <= 6`.
    pub covariance: Matrix6<f64>,
}

pub fn solve_multiview_pnp(
    corr: &CorrespondenceSet,
    cams: &[CameraModel],
    init: Option<Pose>,
) -> Result<PnpSolution, PnpError> {
    solve_multiview_pnp_with(
        corr,
        cams,
        &PnpOptions {
            init,
            ..PnpOptions::default()
        },
    )
}

pub fn solve_multiview_pnp_with(
    corr: &CorrespondenceSet,
    cams: &[CameraModel],
    opts: &PnpOptions,
) -> Result<PnpSolution, PnpError> {
    validate(corr, cams)?;
    let best = match &opts.init {
        Some(p) => levenberg_marquardt(*p, corr, cams, opts),
        None => {
            let starts = initial_guesses(corr, cams);
            let mut best: Option<Lm> = None;
            for s in starts {
                let run = levenberg_marquardt(s, corr, cams, opts);
                if best.as_ref().is_none_or(|b| run.cost < b.cost) {
                    best = Some(run);
                }
                if best.as_ref().is_some_and(|b| rms_of(b.cost, corr.len()) < 1e-3) {
                    break;
                }
            }
            best.expect("at least one starting point")
        }
    };
    let n = corr.len();
    let rms = rms_of(best.cost, n);
    if !(rms <= opts.divergence_rms) {
        return Err(PnpError::Diverged {
            pose: best.pose,
            rms,
            iterations: best.iterations,
        });
    }
    let pose = Pose::new_unchecked(
        nearest_rotation(best.pose.rotation()).expect("rotation stays regular"),
        *best.pose.translation(),
    );
    Ok(PnpSolution {
        covariance: covariance(&pose, corr, cams, best.cost),
        pose,
        rms,
        iterations: best.iterations,
        cost_trace: best.trace,
    })
}

fn rms_of(cost: f64, n: usize) -> f64 {
    (2.0 * cost / (2 * n) as f64).sqrt()
}

fn validate(corr: &CorrespondenceSet, cams: &[CameraModel]) -> Result<(), PnpError> {
    if corr.per_camera.len() != cams.len() {
        return Err(PnpError::CameraMismatch {
            cameras: cams.len(),
            lists: corr.per_camera.len(),
        });
    }
    let n = corr.len();
    if n < 3 {
        return Err(PnpError::Underdetermined { count: n });
    }
    if corr
        .iter()
        .any(|(_, c)| c.object.iter().chain(c.pixel.iter()).any(|v| !v.is_finite()))
    {
        return Err(PnpError::NonFinite);
    }
    let pts: Vec<Vector3<f64>> = corr.iter().map(|(_, c)| c.object).collect();
    let mean = pts.iter().sum::<Vector3<f64>>() / n as f64;
    let cov = pts
        .iter()
        .map(|p| (p - mean) * (p - mean).transpose())
        .sum::<Matrix3<f64>>();
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[1] > 1e-12 * ev[0]) {
        return Err(PnpError::Degenerate);
    }
    Ok(())
}

struct Lm {
    pose: Pose,
    cost: f64,
    iterations: usize,
    trace: Vec<f64>,
}

/// Half the squared residual norm, with `∞` when a point is behind its camera.
fn cost_at(pose: &Pose, corr: &CorrespondenceSet, cams: &[CameraModel]) -> f64 {
    let mut c = 0.0;
    for (j, p) in corr.iter() {
        match cams[j].project(&transform(&pose, &p.object)) {
            Some(px) => c += (px - p.pixel).norm_squared(),
            None => return f64::INFINITY,
        }
    }
    0.5 * c
}

fn normal_equations(
    pose: &Pose,
    corr: &CorrespondenceSet,
    cams: &[CameraModel],
) -> (Matrix6<f64>, Vector6<f64>) {
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for (j, c) in corr.iter() {
        let (r, jr) = point_terms(pose, &cams[j], c);
        h += jr.transpose() * jr;
        g += jr.transpose() * r;
    }
    (h, g)
}

fn levenberg_marquardt(start: Pose, corr: &CorrespondenceSet, cams: &[CameraModel], opts: &PnpOptions) -> Lm {
    let mut pose = start;
    let mut cost = cost_at(&pose, corr, cams);
    let mut trace = vec![cost];
    let (mut h, mut g) = normal_equations(&pose, corr, cams);
    let mut mu = 1e-3 * (0..6).map(|i| h[(i, i)]).fold(0.0, f64::max);
    let mut nu = 2.0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 || g.amax() == 0.0 {
            break;
        }
        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += mu;
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&(-g))) else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let last = step.norm() < opts.step_tol;
        let candidate = retract(&pose, &step);
        let new_cost = cost_at(&candidate, corr, cams);
        let predicted = 0.5 * step.dot(&(mu * step - g));
        let rho = (cost - new_cost) / predicted;
        if new_cost.is_finite() && new_cost <= cost && rho > 0.0 {
            pose = candidate;
            cost = new_cost;
            trace.push(cost);
            (h, g) = normal_equations(&pose, corr, cams);
            mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
        if last {
            // Damping shrinks the final steps; one undamped Gauss-Newton step
            // recovers full precision near the optimum.
            if let Some(gn) = h.cholesky().map(|c| c.solve(&(-g))) {
                let candidate = retract(&pose, &gn);
                let new_cost = cost_at(&candidate, corr, cams);
                if new_cost < cost {
                    pose = candidate;
                    cost = new_cost;
                    trace.push(cost);
                }
            }
            break;
        }
    }
    Lm {
        pose,
        cost,
        iterations,
        trace,
    }
}

fn covariance(pose: &Pose, corr: &CorrespondenceSet, cams: &[CameraModel], cost: f64) -> Matrix6<f64> {
    let n = corr.len();
    if 2 * n <= 6 {
        return Matrix6::repeat(f64::INFINITY);
    }
    let (h, _) = normal_equations(pose, corr, cams);
    let sigma2 = 2.0 * cost / (2 * n - 6) as f64;
    match h.try_inverse() {
        Some(inv) => inv * sigma2,
        None => Matrix6::repeat(f64::INFINITY),
    }
}

/// Candidate starting poses, best guess first.
fn initial_guesses(corr: &CorrespondenceSet, cams: &[CameraModel]) -> Vec<Pose> {
    let j = (0..cams.len())
        .max_by(|&a, &b| {
            corr.per_camera[a]
                .len()
                .cmp(&corr.per_camera[b].len())
                .then(b.cmp(&a))
        })
        .expect("at least one camera");
    let cam = &cams[j];
    let list = &corr.per_camera[j];
    let to_reference = cam.extrinsics.inverse();
    let mut out = Vec::new();
    if let Some(p) = dlt(list, cam) {
        out.push(to_reference.compose(&p));
    }
    if list.is_empty() {
        return out;
    }
    // Fallback: the 24 cube rotations, placed along the mean viewing ray at a
    // depth matching the observed spread.
    let m = list.len() as f64;
    let c_obj = list.iter().map(|c| c.object).sum::<Vector3<f64>>() / m;
    let c_px = list.iter().map(|c| c.pixel).sum::<Vector2<f64>>() / m;
    let s_obj = (list.iter().map(|c| (c.object - c_obj).norm_squared()).sum::<f64>() / m).sqrt();
    let s_px = (list.iter().map(|c| (c.pixel - c_px).norm_squared()).sum::<f64>() / m).sqrt();
    let f = 0.5 * (cam.k[(0, 0)] + cam.k[(1, 1)]);
    let depth = if s_px > 0.0 && s_obj > 0.0 { f * s_obj / s_px } else { 1.0 };
    let k_inv = cam.k.try_inverse().expect("upper triangular with positive diagonal");
    let ray = k_inv * Vector3::new(c_px.x, c_px.y, 1.0);
    let center = ray / ray.z * depth;
    for r in ProperSymmetryGroup::octahedral().rotations() {
        let p_cam = Pose::new_unchecked(*r, center - r * c_obj);
        out.push(to_reference.compose(&p_cam));
    }
    out
}

/// Camera-frame pose from a normalized DLT; `None` when fewer than six
/// points or the points are (nearly) coplanar.
fn dlt(list: &[Correspondence], cam: &CameraModel) -> Option<Pose> {
    let n = list.len();
    if n < 6 {
        return None;
    }
    let k_inv = cam.k.try_inverse()?;
    let mean = list.iter().map(|c| c.object).sum::<Vector3<f64>>() / n as f64;
    let scale = (list.iter().map(|c| (c.object - mean).norm_squared()).sum::<f64>() / n as f64).sqrt();
    if !(scale > 0.0) {
        return None;
    }
    let mut ata = nalgebra::SMatrix::<f64, 12, 12>::zeros();
    for c in list {
        let x = (c.object - mean) / scale;
        let xh = [x.x, x.y, x.z, 1.0];
        let u = k_inv * Vector3::new(c.pixel.x, c.pixel.y, 1.0);
        let (u, v) = (u.x / u.z, u.y / u.z);
        let mut r1 = nalgebra::SVector::<f64, 12>::zeros();
        let mut r2 = nalgebra::SVector::<f64, 12>::zeros();
        for k in 0..4 {
            r1[k] = xh[k];
            r1[8 + k] = -u * xh[k];
            r2[4 + k] = xh[k];
            r2[8 + k] = -v * xh[k];
        }
        ata += r1 * r1.transpose() + r2 * r2.transpose();
    }
    let eig = SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1, lmax) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[11]],
    );
    // A second near-null direction means the points do not pin down the
    // projection (coplanar configurations).
    if !(l1 > 1e-10 * lmax) || l0 > 0.1 * l1 {
        return None;
    }
    let sol = eig.eigenvectors.column(order[0]);
    let mut m = Matrix3x4::from_row_slice(sol.as_slice());
    let a = m.fixed_view::<3, 3>(0, 0).into_owned();
    if a.determinant() < 0.0 {
        m = -m;
    }
    let a = m.fixed_view::<3, 3>(0, 0).into_owned();
    // m maps normalized points x' = (x - mean) / scale, so in the original
    // coordinates the projection is [a / scale | b - a·mean / scale] ∝ [R | t].
    let r = nearest_rotation(&a)?;
    let s = (r.transpose() * a).trace() / (3.0 * scale);
    if !(s > 0.0) {
        return None;
    }
    let b = m.column(3).into_owned();
    let t = (b - a * mean / scale) / s;
    Some(Pose::new_unchecked(r, t))
}
