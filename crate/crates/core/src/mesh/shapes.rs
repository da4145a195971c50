//! Procedural meshes used by fixtures and tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::TriMesh;
use crate::geom::Vec3;

/// Axis-aligned cube `[0, size]^3`, outward CCW faces. Vertex `i` has
/// coordinates given by bits of `i` (x = bit 0, y = bit 1, z = bit 2).
pub fn cube(size: f64) -> TriMesh {
    let s = size;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 != 0 { s } else { 0.0 },
                if i & 2 != 0 { s } else { 0.0 },
                if i & 4 != 0 { s } else { 0.0 },
            )
        })
        .collect();
    // every face diagonal passes through corner 0 or corner 7
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1], // z = 0
        [4, 5, 7],
        [4, 7, 6], // z = s
        [0, 1, 5],
        [0, 5, 4], // y = 0
        [2, 6, 7],
        [2, 7, 3], // y = s
        [0, 4, 6],
        [0, 6, 2], // x = 0
        [1, 3, 7],
        [1, 7, 5], // x = s
    ];
    TriMesh { vertices, faces }
}

/// Flat `nx` x `ny` quad grid in the z = 0 plane, normals +z.
pub fn grid(nx: usize, ny: usize, size: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(
                size * i as f64 / nx as f64,
                size * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let mut faces = Vec::with_capacity(nx * ny * 2);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh { vertices, faces }
}

/// Icosahedron subdivided `level` times and projected to a sphere.
pub fn icosphere(radius: f64, level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::from(*p).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriMesh { vertices, faces }
}

/// Closed capsule along z: a cylinder of `length` between two hemispherical
/// caps of `radius`. `rings` rings of `segments` vertices are spaced evenly by
/// profile arc length between the two poles, so the mesh has
/// `rings * segments + 2` vertices and `2 * rings * segments` faces.
pub fn capsule(rings: usize, segments: usize, radius: f64, length: f64) -> TriMesh {
    assert!(rings >= 1 && segments >= 3);
    let cap = PI * radius / 2.0;
    let total = 2.0 * cap + length;
    let half = length / 2.0;
    // (radial distance, z) at profile arc length s from the bottom pole
    let profile = |s: f64| -> (f64, f64) {
        if s < cap {
            let a = s / radius;
            (radius * a.sin(), -half - radius * a.cos())
        } else if s <= cap + length {
            (radius, -half + (s - cap))
        } else {
            let a = (total - s) / radius;
            (radius * a.sin(), half + radius * a.cos())
        }
    };
    let mut vertices = Vec::with_capacity(rings * segments + 2);
    vertices.push(Vec3::new(0.0, 0.0, -half - radius));
    for r in 0..rings {
        let s = total * (r + 1) as f64 / (rings + 1) as f64;
        let (rad, z) = profile(s);
        for k in 0..segments {
            let phi = 2.0 * PI * k as f64 / segments as f64;
            vertices.push(Vec3::new(rad * phi.cos(), rad * phi.sin(), z));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, half + radius));
    let top = vertices.len() - 1;
    let ring = |r: usize, k: usize| 1 + r * segments + (k % segments);
    let mut faces = Vec::with_capacity(2 * rings * segments);
    for k in 0..segments {
        faces.push([0, ring(0, k + 1), ring(0, k)]);
    }
    for r in 0..rings - 1 {
        for k in 0..segments {
            faces.push([ring(r, k), ring(r, k + 1), ring(r + 1, k + 1)]);
            faces.push([ring(r, k), ring(r + 1, k + 1), ring(r + 1, k)]);
        }
    }
    for k in 0..segments {
        faces.push([top, ring(rings - 1, k), ring(rings - 1, k + 1)]);
    }
    TriMesh { vertices, faces }
}

/// Open cylinder along z with `rings` rings (>= 2) and no caps.
pub fn open_cylinder(rings: usize, segments: usize, radius: f64, length: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(rings * segments);
    for r in 0..rings {
        let z = -length / 2.0 + length * r as f64 / (rings - 1) as f64;
        for k in 0..segments {
            let phi = 2.0 * PI * k as f64 / segments as f64;
            vertices.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), z));
        }
    }
    let id = |r: usize, k: usize| r * segments + (k % segments);
    let mut faces = Vec::new();
    for r in 0..rings - 1 {
        for k in 0..segments {
            faces.push([id(r, k), id(r, k + 1), id(r + 1, k + 1)]);
            faces.push([id(r, k), id(r + 1, k + 1), id(r + 1, k)]);
        }
    }
    TriMesh { vertices, faces }
}

/// Concatenates meshes into one, offsetting indices.
pub fn merge(meshes: &[TriMesh]) -> TriMesh {
    let mut out = TriMesh::default();
    for m in meshes {
        let base = out.vertices.len();
        out.vertices.extend_from_slice(&m.vertices);
        out.faces
            .extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_closed_and_outward() {
        for m in [cube(1.0), icosphere(1.0, 1), capsule(5, 8, 0.2, 1.0)] {
            m.validate().unwrap();
            assert!(m.is_closed());
            assert_eq!(m.euler_characteristic(), 2);
            // outward: signed volume positive
            let vol: f64 = m
                .faces
                .iter()
                .map(|f| {
                    m.vertices[f[0]].dot(&m.vertices[f[1]].cross(&m.vertices[f[2]])) / 6.0
                })
                .sum();
            assert!(vol > 0.0);
        }
    }

    #[test]
    fn capsule_counts() {
        let m = capsule(43, 16, 0.15, 1.7);
        assert_eq!(m.vertices.len(), 690);
        assert_eq!(m.faces.len(), 1376);
        let m = capsule(123, 56, 0.15, 1.7);
        assert_eq!(m.faces.len(), 13_776);
    }

    #[test]
    fn icosphere_counts() {
        let m = icosphere(2.0, 3);
        assert_eq!(m.faces.len(), 20 * 64);
        assert!(m.vertices.iter().all(|v| (v.norm() - 2.0).abs() < 1e-12));
    }
}
