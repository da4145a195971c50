use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MeshError, TriMesh};
use crate::geom::Vec3;

/// Loads an ASCII OBJ file. Only `v` and `f` records are read; polygons are
/// fan-split and `f` entries may carry `/vt/vn` suffixes.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for slot in &mut xyz {
                    let tok = tokens.next().ok_or_else(|| MeshError::Parse {
                        line: line_no,
                        msg: "vertex needs 3 coordinates".into(),
                    })?;
                    *slot = tok.parse().map_err(|_| MeshError::Parse {
                        line: line_no,
                        msg: format!("bad coordinate `{tok}`"),
                    })?;
                }
                vertices.push(Vec3::from(xyz));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                        line: line_no,
                        msg: format!("bad face index `{tok}`"),
                    })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(MeshError::Parse {
                            line: line_no,
                            msg: format!("face index {i} out of range"),
                        });
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        msg: format!("polygon with {} vertices", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    let f = [idx[0], idx[k], idx[k + 1]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        return Err(MeshError::Parse {
                            line: line_no,
                            msg: "face repeats a vertex".into(),
                        });
                    }
                    faces.push(f);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Serializes a mesh as ASCII OBJ with 1-based indices.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        // {:?} on f64 prints the shortest string that round-trips exactly
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, write_obj(mesh))?;
    Ok(())
}
