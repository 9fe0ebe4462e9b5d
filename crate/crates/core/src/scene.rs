//! Synthetic bin scenes: collision-free pose sampling, z-buffer depth
//! rendering and occlusion rates by render comparison.
//!
//! Instances are kept apart by their enclosing spheres (radius half the
//! diameter, centered on the surface centroid), so scenes are valid fixtures
//! but not physically settled piles.

use std::io::{self, Read, Write};

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::object::ObjectModel;
use crate::pnp::CameraModel;
use crate::pose::Pose;
use crate::rotation::random_rotation;

pub const DEFAULT_WIDTH: usize = 640;
pub const DEFAULT_HEIGHT: usize = 480;
/// Placement attempts per requested instance before giving up.
pub const ATTEMPTS_PER_INSTANCE: usize = 10_000;
/// Triangles with a vertex closer than this to the camera plane are skipped.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("bin cannot hold an instance of diameter {diameter}")]
    BinTooSmall { diameter: f64 },
    #[error("placed only {placed} of {requested} instances")]
    PlacementFailed { placed: usize, requested: usize },
    #[error("image size must be nonzero, got {width}x{height}")]
    ZeroSizeImage { width: usize, height: usize },
    #[error("invalid bin: {0}")]
    InvalidBin(String),
}

/// Axis-aligned box in the reference frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BinBox {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, SceneError> {
        if min.iter().chain(&max).any(|v| !v.is_finite()) || (0..3).any(|k| !(max[k] > min[k])) {
            return Err(SceneError::InvalidBin(format!("{min:?} .. {max:?}")));
        }
        Ok(Self { min, max })
    }

    /// A bin centered on the origin's vertical axis, floor at `z = 0`, large
    /// enough for `count` instances of the given diameter to be placed easily.
    pub fn for_instances(diameter: f64, count: usize) -> Self {
        let needed = 6.0 * count.max(1) as f64;
        let mut side = 3.0;
        while (side - 1.0) * (side - 1.0) * (side / 2.0 - 1.0) < needed {
            side += 0.5;
        }
        let half = side * diameter / 2.0;
        Self {
            min: [-half, -half, 0.0],
            max: [half, half, half],
        }
    }

    fn extent(&self, k: usize) -> f64 {
        self.max[k] - self.min[k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub instance_count: usize,
    pub bin: BinBox,
    pub seed: u64,
}

/// Uniform rotations and uniform translations inside the bin, rejecting any
/// enclosing sphere that leaves the bin or meets another one. Deterministic
/// in `spec.seed`.
pub fn sample_scene(spec: &SceneSpec, object: &ObjectModel) -> Result<Vec<Pose>, SceneError> {
    let r = object.diameter() / 2.0;
    if (0..3).any(|k| spec.bin.extent(k) < 2.0 * r) {
        return Err(SceneError::BinTooSmall {
            diameter: object.diameter(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut centers: Vec<Vector3<f64>> = Vec::with_capacity(spec.instance_count);
    let mut poses = Vec::with_capacity(spec.instance_count);
    let budget = ATTEMPTS_PER_INSTANCE * spec.instance_count.max(1);
    let mut attempts = 0;
    while poses.len() < spec.instance_count {
        if attempts == budget {
            return Err(SceneError::PlacementFailed {
                placed: poses.len(),
                requested: spec.instance_count,
            });
        }
        attempts += 1;
        let t = Vector3::from_fn(|k, _| {
            let (lo, hi) = (spec.bin.min[k] + r, spec.bin.max[k] - r);
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        });
        if centers.iter().any(|c| (c - t).norm() < 2.0 * r) {
            continue;
        }
        let rotation = random_rotation(&mut rng);
        centers.push(t);
        poses.push(Pose::new_unchecked(rotation, t));
    }
    Ok(poses)
}

/// Camera above the bin looking straight down, its field of view covering
/// the bin top with a small margin.
pub fn top_view_camera(bin: &BinBox, width: usize, height: usize) -> CameraModel {
    let cx = 0.5 * (bin.min[0] + bin.max[0]);
    let cy = 0.5 * (bin.min[1] + bin.max[1]);
    let span = bin.extent(0).max(bin.extent(1));
    let standoff = 1.5 * span;
    let center = Vector3::new(cx, cy, bin.max[2] + standoff);
    // Camera z points down, x along world x.
    let r = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    let extrinsics = Pose::new_unchecked(r, -(r * center));
    let f = 0.9 * standoff * (width.min(height) as f64) / (bin.extent(0).max(bin.extent(1)));
    CameraModel::from_focal(f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, extrinsics)
        .expect("valid intrinsics")
}

/// Per-pixel depth (camera z) and instance index. Pixel `(x, y)` samples the
/// continuous image point `(x, y)`, i.e. integer coordinates are centers.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    depth: Vec<f64>,
    ids: Vec<u32>,
}

const NO_ID: u32 = u32::MAX;

impl DepthImage {
    fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            ids: vec![NO_ID; width * height],
        }
    }

    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.depth[y * self.width + x];
        d.is_finite().then_some(d)
    }

    pub fn id_at(&self, x: usize, y: usize) -> Option<usize> {
        let id = self.ids[y * self.width + x];
        (id != NO_ID).then_some(id as usize)
    }

    /// Number of pixels won by each of `n` instances.
    pub fn pixel_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for &id in &self.ids {
            if id != NO_ID && (id as usize) < n {
                counts[id as usize] += 1;
            }
        }
        counts
    }

    pub fn covered(&self) -> usize {
        self.ids.iter().filter(|&&id| id != NO_ID).count()
    }

    /// 16-bit depth in thousandths of the length unit, 0 where empty or
    /// out of range.
    pub fn depth_u16(&self) -> Vec<u16> {
        self.depth
            .iter()
            .map(|&d| {
                let v = (d * 1000.0).round();
                if d.is_finite() && v >= 1.0 && v <= 65535.0 {
                    v as u16
                } else {
                    0
                }
            })
            .collect()
    }

    /// 16-bit id map: instance index + 1, 0 for background.
    pub fn ids_u16(&self) -> Vec<u16> {
        self.ids
            .iter()
            .map(|&id| if id == NO_ID { 0 } else { (id + 1).min(65535) as u16 })
            .collect()
    }
}

struct ScreenTriangle {
    p: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    area2: f64,
    id: u32,
    y_range: (usize, usize),
    x_range: (usize, usize),
}

fn screen_triangles(
    poses: &[(u32, Pose)],
    object: &ObjectModel,
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> Vec<ScreenTriangle> {
    let k = cam.intrinsics();
    let mesh = object.mesh();
    let mut out = Vec::new();
    for (id, pose) in poses {
        let to_cam = cam.extrinsics().compose(pose);
        let verts: Vec<Vector3<f64>> = mesh
            .vertices()
            .iter()
            .map(|v| to_cam.rotation() * v.coords + to_cam.translation())
            .collect();
        for tri in mesh.triangles() {
            let z = tri.map(|i| verts[i as usize]);
            if z.iter().any(|v| v.z <= NEAR_PLANE) {
                continue;
            }
            let p = z.map(|v| {
                let a = k * v;
                Vector2::new(a.x / a.z, a.y / a.z)
            });
            let area2 = (p[1] - p[0]).perp(&(p[2] - p[0]));
            if area2 == 0.0 || !area2.is_finite() {
                continue;
            }
            let lo = |f: fn(&Vector2<f64>) -> f64| p.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = |f: fn(&Vector2<f64>) -> f64| p.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            let (x0, x1) = (lo(|v| v.x).ceil().max(0.0), hi(|v| v.x).floor());
            let (y0, y1) = (lo(|v| v.y).ceil().max(0.0), hi(|v| v.y).floor());
            if x1 < x0 || y1 < y0 || x0 >= width as f64 || y0 >= height as f64 || x1 < 0.0 || y1 < 0.0 {
                continue;
            }
            out.push(ScreenTriangle {
                p,
                inv_z: z.map(|v| 1.0 / v.z),
                area2,
                id: *id,
                x_range: (x0 as usize, (x1 as usize).min(width - 1)),
                y_range: (y0 as usize, (y1 as usize).min(height - 1)),
            });
        }
    }
    out
}

fn rasterize(tris: &[ScreenTriangle], width: usize, height: usize) -> DepthImage {
    let mut img = DepthImage::empty(width, height);
    const BAND: usize = 16;
    img.depth
        .par_chunks_mut(width * BAND)
        .zip(img.ids.par_chunks_mut(width * BAND))
        .enumerate()
        .for_each(|(band, (depth, ids))| {
            let y_start = band * BAND;
            let y_end = (y_start + depth.len() / width).min(height);
            for t in tris {
                let ys = t.y_range.0.max(y_start);
                let ye = t.y_range.1.min(y_end.saturating_sub(1));
                if t.y_range.1 < y_start || t.y_range.0 >= y_end {
                    continue;
                }
                for y in ys..=ye {
                    for x in t.x_range.0..=t.x_range.1 {
                        let q = Vector2::new(x as f64, y as f64);
                        // Edge functions normalized by the signed area, so the
                        // inside test does not depend on the winding.
                        let w0 = (t.p[2] - t.p[1]).perp(&(q - t.p[1])) / t.area2;
                        let w1 = (t.p[0] - t.p[2]).perp(&(q - t.p[2])) / t.area2;
                        let w2 = (t.p[1] - t.p[0]).perp(&(q - t.p[0])) / t.area2;
                        if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                            continue;
                        }
                        let z = 1.0 / (w0 * t.inv_z[0] + w1 * t.inv_z[1] + w2 * t.inv_z[2]);
                        let i = (y - y_start) * width + x;
                        if z < depth[i] || (z == depth[i] && t.id < ids[i]) {
                            depth[i] = z;
                            ids[i] = t.id;
                        }
                    }
                }
            }
        });
    img
}

fn check_size(width: usize, height: usize) -> Result<(), SceneError> {
    if width == 0 || height == 0 {
        return Err(SceneError::ZeroSizeImage { width, height });
    }
    Ok(())
}

/// Z-buffer rendering of every instance; ids are positions in `poses`, equal
/// depths go to the lower id. No back-face culling.
pub fn render_depth(
    poses: &[Pose],
    object: &ObjectModel,
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> Result<DepthImage, SceneError> {
    check_size(width, height)?;
    let tagged: Vec<(u32, Pose)> = poses.iter().enumerate().map(|(i, p)| (i as u32, *p)).collect();
    Ok(rasterize(&screen_triangles(&tagged, object, cam, width, height), width, height))
}

/// `o = 1 - B / A` per instance, where `A` counts pixels covered by the
/// instance rendered alone and `B` pixels it wins in the full scene; `o = 1`
/// when `A = 0`.
pub fn occlusion_rates(
    poses: &[Pose],
    object: &ObjectModel,
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> Result<Vec<f64>, SceneError> {
    let full = render_depth(poses, object, cam, width, height)?;
    let won = full.pixel_counts(poses.len());
    let alone: Vec<usize> = poses
        .par_iter()
        .map(|p| {
            let tris = screen_triangles(&[(0, *p)], object, cam, width, height);
            rasterize(&tris, width, height).covered()
        })
        .collect();
    Ok(won
        .iter()
        .zip(&alone)
        .map(|(&b, &a)| if a == 0 { 1.0 } else { 1.0 - b as f64 / a as f64 })
        .collect())
}

/// Independent per-scene seeds drawn from one base seed.
pub fn scene_seeds(base: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    (0..count).map(|_| rng.random()).collect()
}

/// A sampled scene with its annotation and rendering.
#[derive(Clone, Debug)]
pub struct GeneratedScene {
    pub seed: u64,
    pub bin: BinBox,
    pub camera: CameraModel,
    /// Sorted by ascending occlusion rate, ties in sampling order.
    pub poses: Vec<Pose>,
    pub occlusion: Vec<f64>,
    /// Rendered after sorting, so image ids are positions in `poses`.
    pub image: DepthImage,
}

/// Samples `instances` poses in a default bin seen by a top-view camera,
/// annotates occlusion rates and renders the depth and id images.
pub fn generate_scene(
    object: &ObjectModel,
    instances: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<GeneratedScene, SceneError> {
    check_size(width, height)?;
    let bin = BinBox::for_instances(object.diameter(), instances);
    let spec = SceneSpec {
        instance_count: instances,
        bin,
        seed,
    };
    let sampled = sample_scene(&spec, object)?;
    let camera = top_view_camera(&bin, width, height);
    let rates = occlusion_rates(&sampled, object, &camera, width, height)?;
    let mut order: Vec<usize> = (0..sampled.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
    let poses: Vec<Pose> = order.iter().map(|&i| sampled[i]).collect();
    let occlusion = order.iter().map(|&i| rates[i]).collect();
    let image = render_depth(&poses, object, &camera, width, height)?;
    Ok(GeneratedScene {
        seed,
        bin,
        camera,
        poses,
        occlusion,
        image,
    })
}

/// Binary PGM (P5) with 16-bit big-endian samples.
pub fn write_pgm16(mut w: impl Write, width: usize, height: usize, data: &[u16]) -> io::Result<()> {
    assert_eq!(data.len(), width * height);
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_be_bytes()).collect();
    w.write_all(&bytes)
}

pub fn read_pgm16(mut r: impl Read) -> io::Result<(usize, usize, Vec<u16>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("expected a 16-bit P5 image"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM size"));
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = buf.get(pos..pos + 2 * width * height).ok_or_else(|| bad("truncated PGM data"))?;
    let data = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((width, height, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;
    use crate::symmetry::ProperSymmetryGroup;
    use crate::shapes;
    use nalgebra::Point3;

    fn camera(w: usize, h: usize) -> CameraModel {
        CameraModel::from_focal(100.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, Pose::identity()).unwrap()
    }

    #[test]
    fn pgm_roundtrip() {
        let data: Vec<u16> = (0..12).map(|i| i * 5000).collect();
        let mut buf = Vec::new();
        write_pgm16(&mut buf, 4, 3, &data).unwrap();
        assert_eq!(read_pgm16(&buf[..]).unwrap(), (4, 3, data));
    }

    #[test]
    fn zero_size_rejected() {
        let obj = ObjectModel::new(shapes::cuboid(1.0, 1.0, 1.0), ProperSymmetryGroup::trivial()).unwrap();
        assert!(render_depth(&[], &obj, &camera(1, 1), 0, 5).is_err());
    }

    #[test]
    fn single_triangle_covers_projected_pixels() {
        // A right triangle at depth 2, legs of 0.2: 10 pixels on screen.
        let mesh = TriangleMesh::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.2, 0.0, 0.0), Point3::new(0.0, 0.2, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let obj = ObjectModel::new(mesh, ProperSymmetryGroup::trivial()).unwrap();
        let off = *obj.origin_offset();
        let cam = CameraModel::from_focal(100.0, 0.0, 0.0, Pose::identity()).unwrap();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 2.0) + off);
        let img = render_depth(&[pose], &obj, &cam, 40, 40).unwrap();
        // Lattice points (x, y) with x, y >= 0 and x + y <= 10.
        assert_eq!(img.covered(), 66);
        assert_eq!(img.id_at(0, 0), Some(0));
        assert_eq!(img.depth_at(3, 3), Some(2.0));
        assert_eq!(img.id_at(11, 0), None);
    }
}
