//! Procedural meshes used for fixtures and tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Point3;

use crate::mesh::TriangleMesh;

/// Axis-aligned box centered at the origin with the given half extents.
pub fn cuboid(hx: f64, hy: f64, hz: f64) -> TriangleMesh {
    let v = |x: f64, y: f64, z: f64| Point3::new(x * hx, y * hy, z * hz);
    let vertices = vec![
        v(-1.0, -1.0, -1.0),
        v(1.0, -1.0, -1.0),
        v(1.0, 1.0, -1.0),
        v(-1.0, 1.0, -1.0),
        v(-1.0, -1.0, 1.0),
        v(1.0, -1.0, 1.0),
        v(1.0, 1.0, 1.0),
        v(-1.0, 1.0, 1.0),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [1, 2, 6],
        [1, 6, 5],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(vertices, triangles).expect("cuboid is non-degenerate")
}

/// Regular icosahedron with vertices at distance `radius` from the origin.
pub fn icosahedron(radius: f64) -> TriangleMesh {
    icosphere(radius, 0)
}

/// Subdivided icosahedron projected onto the sphere of the given radius.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::new(x, y, z))
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Point3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = nalgebra::center(&vertices[a as usize], &vertices[b as usize]);
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }

    for v in &mut vertices {
        *v = Point3::from(v.coords.normalize() * radius);
    }
    TriangleMesh::new(vertices, triangles).expect("icosphere is non-degenerate")
}

/// Surface of revolution about the z axis.
///
/// `profile` lists `(radius, z)` pairs from one end to the other; points with zero
/// radius become poles. Ring vertices sit at angles `2πk/segments`, so the result
/// has exact `segments`-fold symmetry about z.
pub fn lathe(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    assert!(segments >= 3 && profile.len() >= 2);
    let mut vertices = Vec::new();
    // each profile point maps to either a pole index or a ring start
    let mut rings: Vec<(bool, u32)> = Vec::with_capacity(profile.len());
    for &(r, z) in profile {
        let start = vertices.len() as u32;
        if r == 0.0 {
            vertices.push(Point3::new(0.0, 0.0, z));
            rings.push((true, start));
        } else {
            for k in 0..segments {
                let a = 2.0 * PI * k as f64 / segments as f64;
                vertices.push(Point3::new(r * a.cos(), r * a.sin(), z));
            }
            rings.push((false, start));
        }
    }
    let n = segments as u32;
    let mut triangles = Vec::new();
    for w in rings.windows(2) {
        let ((pole0, s0), (pole1, s1)) = (w[0], w[1]);
        for k in 0..n {
            let k1 = (k + 1) % n;
            match (pole0, pole1) {
                (true, true) => {}
                (true, false) => triangles.push([s0, s1 + k1, s1 + k]),
                (false, true) => triangles.push([s0 + k, s0 + k1, s1]),
                (false, false) => {
                    triangles.push([s0 + k, s0 + k1, s1 + k1]);
                    triangles.push([s0 + k, s1 + k1, s1 + k]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles).expect("lathe profile is non-degenerate")
}

/// Closed prism (or cylinder for large `sides`) centered at the origin along z.
pub fn prism(radius: f64, half_height: f64, sides: usize) -> TriangleMesh {
    lathe(
        &[
            (0.0, -half_height),
            (radius, -half_height),
            (radius, half_height),
            (0.0, half_height),
        ],
        sides,
    )
}

/// Open-topped cup: a flat bottom and a wall, no handle.
pub fn cup(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut profile = vec![(0.0, 0.0)];
    let rings = 8;
    profile.extend((0..=rings).map(|k| {
        let s = k as f64 / rings as f64;
        (radius * (1.0 + 0.1 * s), height * s)
    }));
    lathe(&profile, segments)
}
