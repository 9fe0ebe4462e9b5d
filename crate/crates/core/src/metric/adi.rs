//! Average closest-vertex distance (the "ADI" dissimilarity for symmetric objects).

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::mesh::TriangleMesh;
use crate::pose::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdiDirection {
    /// Mean over vertices placed by the first pose of the closest vertex placed by the second.
    Forward,
    /// Same with the poses swapped.
    Reverse,
    /// Larger of the two directions.
    Symmetric,
}

fn one_way(from: &[Point3<f64>], to: &[Point3<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|x| {
            to.iter()
                .map(|y| (x - y).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    total / from.len() as f64
}

/// ADI between two poses of `mesh`, optionally on every `stride`-th vertex.
pub fn adi(
    a: &Pose,
    b: &Pose,
    mesh: &TriangleMesh,
    direction: AdiDirection,
    stride: Option<usize>,
) -> Result<f64, MetricError> {
    let step = stride.unwrap_or(1).max(1);
    let verts: Vec<&Point3<f64>> = mesh.vertices().iter().step_by(step).collect();
    if verts.is_empty() {
        return Err(MetricError::EmptyMesh);
    }
    let pa: Vec<Point3<f64>> = verts.iter().map(|v| a.apply(v)).collect();
    let pb: Vec<Point3<f64>> = verts.iter().map(|v| b.apply(v)).collect();
    Ok(match direction {
        AdiDirection::Forward => one_way(&pa, &pb),
        AdiDirection::Reverse => one_way(&pb, &pa),
        AdiDirection::Symmetric => one_way(&pa, &pb).max(one_way(&pb, &pa)),
    })
}

/// One-directional ADI over all vertices.
pub fn adi_dissimilarity(a: &Pose, b: &Pose, mesh: &TriangleMesh) -> Result<f64, MetricError> {
    adi(a, b, mesh, AdiDirection::Forward, None)
}
