//! Triangle meshes: storage, surface integrals and PLY/OBJ ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType,
    ScalarType,
};
use ply_rs::writer::Writer;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mesh: {0}")]
    Malformed(String),
    #[error("unsupported mesh format for {0:?} (expected .ply or .obj)")]
    UnsupportedFormat(String),
    #[error("face {face} has {arity} vertices, only triangles are accepted")]
    NonTriangle { face: usize, arity: usize },
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        count: usize,
    },
    #[error("degenerate surface: total area is zero")]
    DegenerateSurface,
}

/// An indexed triangle mesh in object-frame length units.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices and zero-area surfaces.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index,
                        count: vertices.len(),
                    });
                }
            }
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(MeshError::Malformed("non-finite vertex coordinate".into()));
        }
        let mesh = Self {
            vertices,
            triangles,
        };
        let area = mesh.surface_area();
        if !(area > 0.0) {
            return Err(MeshError::DegenerateSurface);
        }
        Ok(mesh)
    }

    /// Loads a `.ply` or `.obj` file, dispatching on the extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let mut reader = BufReader::new(File::open(path)?);
        match ext.as_deref() {
            Some("ply") => Self::read_ply(&mut reader),
            Some("obj") => Self::read_obj(&mut reader),
            _ => Err(MeshError::UnsupportedFormat(path.display().to_string())),
        }
    }

    pub fn read_obj(reader: &mut impl BufRead) -> Result<Self, MeshError> {
        let options = tobj::LoadOptions {
            single_index: false,
            triangulate: false,
            ignore_points: true,
            ignore_lines: true,
        };
        let (models, _) = tobj::load_obj_buf(reader, &options, |_| {
            Err(tobj::LoadError::OpenFileFailed)
        })
        .map_err(|e| MeshError::Malformed(e.to_string()))?;

        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut face = 0usize;
        for model in models {
            let mesh = model.mesh;
            let base = vertices.len() as u32;
            vertices.extend(
                mesh.positions
                    .chunks_exact(3)
                    .map(|p| Point3::new(p[0], p[1], p[2])),
            );
            if let Some(pos) = mesh.face_arities.iter().position(|&a| a != 3) {
                return Err(MeshError::NonTriangle {
                    face: face + pos,
                    arity: mesh.face_arities[pos] as usize,
                });
            }
            for tri in mesh.indices.chunks_exact(3) {
                triangles.push([base + tri[0], base + tri[1], base + tri[2]]);
                face += 1;
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn read_ply(reader: &mut impl BufRead) -> Result<Self, MeshError> {
        let parser = Parser::<DefaultElement>::new();
        let ply = parser
            .read_ply(reader)
            .map_err(|e| MeshError::Malformed(e.to_string()))?;

        let vertex_elems = ply
            .payload
            .get("vertex")
            .ok_or_else(|| MeshError::Malformed("missing vertex element".into()))?;
        let mut vertices = Vec::with_capacity(vertex_elems.len());
        for (i, v) in vertex_elems.iter().enumerate() {
            let coord = |key: &str| {
                v.get(key).and_then(scalar_as_f64).ok_or_else(|| {
                    MeshError::Malformed(format!("vertex {i} lacks a numeric '{key}'"))
                })
            };
            vertices.push(Point3::new(coord("x")?, coord("y")?, coord("z")?));
        }

        let mut triangles = Vec::new();
        if let Some(faces) = ply.payload.get("face") {
            for (f, elem) in faces.iter().enumerate() {
                let list = elem
                    .get("vertex_indices")
                    .or_else(|| elem.get("vertex_index"))
                    .and_then(list_as_indices)
                    .ok_or_else(|| {
                        MeshError::Malformed(format!("face {f} lacks a vertex index list"))
                    })?;
                if list.len() != 3 {
                    return Err(MeshError::NonTriangle {
                        face: f,
                        arity: list.len(),
                    });
                }
                triangles.push([list[0], list[1], list[2]]);
            }
        }
        Self::new(vertices, triangles)
    }

    /// Writes an ASCII PLY file with double-precision vertices.
    pub fn write_ply(&self, out: &mut impl Write) -> Result<(), MeshError> {
        let mut ply = Ply::<DefaultElement>::new();
        ply.header.encoding = Encoding::Ascii;

        let mut vertex_def = ElementDef::new("vertex".into());
        for axis in ["x", "y", "z"] {
            vertex_def.properties.add(PropertyDef::new(
                axis.into(),
                PropertyType::Scalar(ScalarType::Double),
            ));
        }
        ply.header.elements.add(vertex_def);
        let mut face_def = ElementDef::new("face".into());
        face_def.properties.add(PropertyDef::new(
            "vertex_indices".into(),
            PropertyType::List(ScalarType::UChar, ScalarType::UInt),
        ));
        ply.header.elements.add(face_def);

        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let mut e = DefaultElement::new();
                e.insert("x".into(), Property::Double(v.x));
                e.insert("y".into(), Property::Double(v.y));
                e.insert("z".into(), Property::Double(v.z));
                e
            })
            .collect();
        let faces = self
            .triangles
            .iter()
            .map(|t| {
                let mut e = DefaultElement::new();
                e.insert("vertex_indices".into(), Property::ListUInt(t.to_vec()));
                e
            })
            .collect();
        ply.payload.insert("vertex".into(), vertices);
        ply.payload.insert("face".into(), faces);

        Writer::new()
            .write_ply(out, &mut ply)
            .map_err(|e| MeshError::Malformed(e.to_string()))?;
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    fn triangle_area(tri: &[Point3<f64>; 3]) -> f64 {
        0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| Self::triangle_area(&self.triangle(i)))
            .sum()
    }

    /// Area-weighted mean of the triangle centroids, i.e. the centroid of the surface.
    pub fn surface_centroid(&self) -> Result<Point3<f64>, MeshError> {
        let mut area = 0.0;
        let mut acc = Vector3::zeros();
        for i in 0..self.triangles.len() {
            let tri = self.triangle(i);
            let a = Self::triangle_area(&tri);
            area += a;
            acc += a * (tri[0].coords + tri[1].coords + tri[2].coords) / 3.0;
        }
        if !(area > 0.0) {
            return Err(MeshError::DegenerateSurface);
        }
        Ok(Point3::from(acc / area))
    }

    /// Surface second moment `(1/S) ∫ x xᵀ ds` about the frame origin.
    ///
    /// Each triangle contributes `(A/12)(Σ vᵢvᵢᵀ + s sᵀ)` with `s = Σ vᵢ`, which is
    /// exact for a linear facet.
    pub fn second_moment(&self) -> Result<Matrix3<f64>, MeshError> {
        let mut area = 0.0;
        let mut acc = Matrix3::zeros();
        for i in 0..self.triangles.len() {
            let tri = self.triangle(i);
            let a = Self::triangle_area(&tri);
            if a == 0.0 {
                continue;
            }
            let s = tri[0].coords + tri[1].coords + tri[2].coords;
            let mut m = s * s.transpose();
            for v in &tri {
                m += v.coords * v.coords.transpose();
            }
            acc += m * (a / 12.0);
            area += a;
        }
        if !(area > 0.0) {
            return Err(MeshError::DegenerateSurface);
        }
        Ok(acc / area)
    }

    /// Largest vertex distance to `center`.
    pub fn max_radius(&self, center: &Point3<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| Point3::from(rotation * v.coords + translation))
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

fn scalar_as_f64(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn list_as_indices(p: &Property) -> Option<Vec<u32>> {
    fn conv<T: Copy + TryInto<u32>>(v: &[T]) -> Option<Vec<u32>> {
        v.iter().map(|&x| x.try_into().ok()).collect()
    }
    match p {
        Property::ListChar(v) => conv(v),
        Property::ListUChar(v) => conv(v),
        Property::ListShort(v) => conv(v),
        Property::ListUShort(v) => conv(v),
        Property::ListInt(v) => conv(v),
        Property::ListUInt(v) => Some(v.clone()),
        _ => None,
    }
}
