//! Indexed triangle meshes, posed mesh pairs and the template operations
//! (normals, expansion, decimation, cleanup).

mod cleanup;
mod decimate;
mod obj;
pub mod shapes;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Vec3};

pub use cleanup::{close_holes, connected_components, remove_components};
pub use decimate::decimate_pair;
pub use obj::{load_obj, parse_obj, save_obj, write_obj};

/// Faces with twice-area below this are treated as degenerate (squared mesh units).
pub const EPS_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("face {face} repeats vertex {index}")]
    RepeatedVertex { face: usize, index: usize },
    #[error("posed pair connectivity mismatch: {0}")]
    PairMismatch(String),
    #[error("decimation stopped at {faces} faces before reaching target {target}")]
    DecimationStalled { faces: usize, target: usize },
    #[error("decimation target {0} is below the 4-face minimum")]
    TargetTooSmall(usize),
    #[error("non-manifold boundary edge ({0}, {1})")]
    NonManifoldEdge(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indexed triangle mesh with counter-clockwise faces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

/// One entry of a degeneracy report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub face_index: usize,
    pub reason: String,
}

/// Normals together with the faces/vertices that could not be given one.
#[derive(Debug, Clone, Default)]
pub struct Normals {
    pub normals: Vec<Vec3>,
    pub report: Vec<Degeneracy>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &index in f {
                if index >= count {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index,
                        count,
                    });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex {
                    face: fi,
                    index: f[0],
                });
            }
            if f[1] == f[2] {
                return Err(MeshError::RepeatedVertex {
                    face: fi,
                    index: f[1],
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Cross product of the two edges from the first corner (twice the area, along the normal).
    #[inline]
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.face_cross(face).norm() * 0.5 <= EPS_AREA
    }

    /// Unit face normals by CCW winding. Degenerate faces get a zero normal
    /// and an entry in the report.
    pub fn face_normals(&self) -> Normals {
        let mut out = Normals {
            normals: Vec::with_capacity(self.faces.len()),
            report: Vec::new(),
        };
        for fi in 0..self.faces.len() {
            let c = self.face_cross(fi);
            let len = c.norm();
            if len * 0.5 <= EPS_AREA {
                out.normals.push(Vec3::zeros());
                out.report.push(Degeneracy {
                    face_index: fi,
                    reason: "area below threshold".into(),
                });
            } else {
                out.normals.push(c / len);
            }
        }
        out
    }

    /// Area-weighted vertex normals. Isolated vertices (no non-degenerate
    /// incident face) get a zero normal; their report entries carry the
    /// vertex index in `face_index`.
    pub fn vertex_normals(&self) -> Normals {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            if self.is_degenerate(fi) {
                continue;
            }
            // the raw cross product is already area-weighted
            let c = self.face_cross(fi);
            for &v in f {
                acc[v] += c;
            }
        }
        let mut report = Vec::new();
        let normals = acc
            .into_iter()
            .enumerate()
            .map(|(vi, n)| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    report.push(Degeneracy {
                        face_index: vi,
                        reason: "isolated vertex".into(),
                    });
                    Vec3::zeros()
                }
            })
            .collect();
        Normals { normals, report }
    }

    /// Moves each vertex `g` along its vertex normal. Faces are unchanged.
    pub fn expand(&self, g: f64) -> TriMesh {
        if g == 0.0 {
            return self.clone();
        }
        let normals = self.vertex_normals().normals;
        TriMesh {
            vertices: self
                .vertices
                .iter()
                .zip(&normals)
                .map(|(v, n)| v + n * g)
                .collect(),
            faces: self.faces.clone(),
        }
    }

    /// Undirected edge -> number of incident faces.
    pub fn edge_use(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    pub fn edge_count(&self) -> usize {
        self.edge_use().len()
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        !self.faces.is_empty() && self.edge_use().values().all(|&n| n == 2)
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.faces.len() as i64
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn reversed(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }
}

/// Canonical and deformed meshes sharing connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedPair {
    pub canonical: TriMesh,
    pub deformed: TriMesh,
}

impl PosedPair {
    pub fn new(canonical: TriMesh, deformed: TriMesh) -> Result<Self, MeshError> {
        if canonical.vertices.len() != deformed.vertices.len() {
            return Err(MeshError::PairMismatch(format!(
                "{} canonical vs {} deformed vertices",
                canonical.vertices.len(),
                deformed.vertices.len()
            )));
        }
        if canonical.faces != deformed.faces {
            return Err(MeshError::PairMismatch("face arrays differ".into()));
        }
        canonical.validate()?;
        Ok(Self {
            canonical,
            deformed,
        })
    }

    pub fn identity(mesh: TriMesh) -> Self {
        Self {
            canonical: mesh.clone(),
            deformed: mesh,
        }
    }
}

/// For each coarse vertex, the original vertex indices merged into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceMap {
    pub coarse_to_fine: Vec<Vec<usize>>,
}

impl CorrespondenceMap {
    pub fn identity(n: usize) -> Self {
        Self {
            coarse_to_fine: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// True when the sets are disjoint and cover `0..original_count`.
    pub fn is_partition_of(&self, original_count: usize) -> bool {
        let mut seen = vec![false; original_count];
        for set in &self.coarse_to_fine {
            for &i in set {
                if i >= original_count || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}
