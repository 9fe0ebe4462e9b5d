//! On-disk formats shared by the command-line tools.
//!
//! Rotations are always 9 row-major floats `R` and translations 3 floats `t`.
//! JSON documents carry `format_version`; readers accept a missing version and
//! reject newer ones.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FORMAT_VERSION;
use crate::eval::{GroundTruthInstance, PrCurve};
use crate::pnp::{CameraModel, Correspondence, CorrespondenceSet};
use crate::pose::{Pose, PoseError};
use crate::pose_space::ScoredPose;
use crate::scene::BinBox;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: format_version {found} is newer than supported {FORMAT_VERSION}")]
    Version { path: PathBuf, found: u32 },
}

impl FormatError {
    fn parse(path: &Path, message: impl ToString) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_version(path: &Path, version: Option<u32>) -> Result<(), FormatError> {
    match version {
        Some(found) if found > FORMAT_VERSION => Err(FormatError::Version {
            path: path.to_path_buf(),
            found,
        }),
        _ => Ok(()),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| FormatError::parse(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FormatError::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `{R, t}` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RtRecord {
    pub R: [f64; 9],
    pub t: [f64; 3],
}

impl RtRecord {
    pub fn to_pose(&self) -> Result<Pose, PoseError> {
        Pose::from_rt(&self.R, &self.t)
    }
}

impl From<&Pose> for RtRecord {
    fn from(p: &Pose) -> Self {
        let a = p.to_array();
        let mut r = [0.0; 9];
        r.copy_from_slice(&a[..9]);
        Self {
            R: r,
            t: [a[9], a[10], a[11]],
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseJson {
    Flat(Vec<f64>),
    Rt(RtRecord),
}

/// Reads a single pose: a JSON array of 12 values, a JSON `{R, t}` object or
/// a CSV row (blank lines and `#` comments skipped).
pub fn read_pose(path: &Path) -> Result<Pose, FormatError> {
    let text = read_text(path)?;
    let trimmed = text.trim_start();
    let pose = if trimmed.starts_with('[') || trimmed.starts_with('{') {
        match serde_json::from_str::<PoseJson>(trimmed).map_err(|e| FormatError::parse(path, e))? {
            PoseJson::Flat(v) => Pose::from_slice(&v),
            PoseJson::Rt(rt) => rt.to_pose(),
        }
    } else {
        let row = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| FormatError::parse(path, "no pose row"))?;
        Pose::from_csv_row(row)
    };
    pose.map_err(|e| FormatError::parse(path, e))
}

/// One line of a votes or hypotheses file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct VoteRecord {
    pub R: [f64; 9],
    pub t: [f64; 3],
    pub score: f64,
    #[serde(default)]
    pub id: Option<String>,
}

/// JSON lines of `{R, t, score, id}`; a missing id becomes the line number.
pub fn read_votes(path: &Path) -> Result<Vec<ScoredPose>, FormatError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| FormatError::parse(path, format!("line {}: {m}", n + 1));
        let rec: VoteRecord = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let pose = Pose::from_rt(&rec.R, &rec.t).map_err(|e| at(e.to_string()))?;
        if !rec.score.is_finite() {
            return Err(at("non-finite score".into()));
        }
        out.push(ScoredPose::new(pose, rec.score, rec.id.unwrap_or_else(|| (n + 1).to_string())));
    }
    Ok(out)
}

pub fn write_votes(mut w: impl Write, votes: &[ScoredPose]) -> io::Result<()> {
    for v in votes {
        let rt = RtRecord::from(&v.pose);
        let rec = VoteRecord {
            R: rt.R,
            t: rt.t,
            score: v.score,
            id: Some(v.id.clone()),
        };
        writeln!(w, "{}", serde_json::to_string(&rec).map_err(io::Error::other)?)?;
    }
    Ok(())
}

/// Intrinsics `K` (row-major) and extrinsics mapping the reference frame
/// into the camera frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CameraRecord {
    pub K: [f64; 9],
    pub extrinsics: RtRecord,
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<CameraModel, String> {
        let pose = self.extrinsics.to_pose().map_err(|e| e.to_string())?;
        CameraModel::new(Matrix3::from_row_slice(&self.K), pose)
    }
}

impl From<&CameraModel> for CameraRecord {
    fn from(c: &CameraModel) -> Self {
        let k = c.intrinsics();
        Self {
            K: std::array::from_fn(|i| k[(i / 3, i % 3)]),
            extrinsics: RtRecord::from(c.extrinsics()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct InstanceRecord {
    pub R: [f64; 9],
    pub t: [f64; 3],
    pub occlusion_rate: f64,
}

/// Ground-truth scene: instances with occlusion rates, optionally the camera,
/// bin and image size they were rendered with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default)]
    pub format_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<BinBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub instances: Vec<InstanceRecord>,
}

impl SceneFile {
    pub fn new(instances: &[GroundTruthInstance]) -> Self {
        Self {
            format_version: Some(FORMAT_VERSION),
            camera: None,
            image_size: None,
            bin: None,
            seed: None,
            instances: instances
                .iter()
                .map(|g| {
                    let rt = RtRecord::from(&g.pose);
                    InstanceRecord {
                        R: rt.R,
                        t: rt.t,
                        occlusion_rate: g.occlusion_rate,
                    }
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let scene: SceneFile = read_json(path)?;
        check_version(path, scene.format_version)?;
        Ok(scene)
    }

    pub fn ground_truth(&self, path: &Path) -> Result<Vec<GroundTruthInstance>, FormatError> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let pose = Pose::from_rt(&r.R, &r.t).map_err(|e| FormatError::parse(path, format!("instance {i}: {e}")))?;
                GroundTruthInstance::new(pose, r.occlusion_rate)
                    .map_err(|e| FormatError::parse(path, format!("instance {i}: {e}")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CorrespondenceRecord {
    pub X: [f64; 3],
    pub p: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedInstance {
    #[serde(default)]
    pub name: Option<String>,
    /// One list per camera, in camera order.
    pub correspondences: Vec<Vec<CorrespondenceRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion_rate: Option<f64>,
}

/// Multiview annotation input: the camera rig and per-instance 2D-3D
/// correspondences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceFile {
    #[serde(default)]
    pub format_version: Option<u32>,
    pub cameras: Vec<CameraRecord>,
    pub instances: Vec<AnnotatedInstance>,
}

impl CorrespondenceFile {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let file: CorrespondenceFile = read_json(path)?;
        check_version(path, file.format_version)?;
        Ok(file)
    }

    pub fn cameras(&self, path: &Path) -> Result<Vec<CameraModel>, FormatError> {
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, c)| c.to_camera().map_err(|e| FormatError::parse(path, format!("camera {i}: {e}"))))
            .collect()
    }
}

impl AnnotatedInstance {
    pub fn correspondence_set(&self) -> CorrespondenceSet {
        CorrespondenceSet::new(
            self.correspondences
                .iter()
                .map(|cam| {
                    cam.iter()
                        .map(|c| Correspondence {
                            object: Vector3::from(c.X),
                            pixel: Vector2::from(c.p),
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// `threshold,precision,recall` rows with a header.
pub fn write_pr_csv(mut w: impl Write, curve: &PrCurve) -> io::Result<()> {
    writeln!(w, "threshold,precision,recall")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}
