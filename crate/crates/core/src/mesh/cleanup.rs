use std::collections::{BTreeMap, HashMap};

use super::{MeshError, TriMesh};
use crate::geom::Vec3;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Component label per vertex (labels are the lowest vertex index in the
/// component, i.e. its seed).
pub fn connected_components(mesh: &TriMesh) -> Vec<usize> {
    let n = mesh.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for f in &mesh.faces {
        for k in 1..3 {
            let a = find(&mut parent, f[0]);
            let b = find(&mut parent, f[k]);
            if a != b {
                // keep the lower index as root so labels are seeds
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    (0..n).map(|v| find(&mut parent, v)).collect()
}

/// Keeps the connected components whose seed vertex (lowest index) satisfies
/// `keep(seed_index, seed_position)`. Vertices are reindexed compactly in
/// their original order.
pub fn remove_components(
    mesh: &TriMesh,
    mut keep: impl FnMut(usize, &Vec3) -> bool,
) -> TriMesh {
    let labels = connected_components(mesh);
    let mut decision: HashMap<usize, bool> = HashMap::new();
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut out = TriMesh::default();
    for (v, &seed) in labels.iter().enumerate() {
        let kept = *decision
            .entry(seed)
            .or_insert_with(|| keep(seed, &mesh.vertices[seed]));
        if kept {
            remap[v] = out.vertices.len();
            out.vertices.push(mesh.vertices[v]);
        }
    }
    out.faces = mesh
        .faces
        .iter()
        .filter(|f| remap[f[0]] != usize::MAX)
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    if out.vertices.is_empty() && !mesh.vertices.is_empty() {
        log::warn!("remove_components kept nothing; returning an empty mesh");
    }
    out
}

/// Fills every boundary loop. Loops of three vertices get a single
/// triangle; longer loops get a fan around the loop centroid.
pub fn close_holes(mesh: &TriMesh) -> Result<TriMesh, MeshError> {
    let mut use_count: HashMap<(usize, usize), usize> = HashMap::new();
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *use_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    if let Some((&(a, b), _)) = use_count.iter().filter(|(_, &n)| n > 2).min() {
        return Err(MeshError::NonManifoldEdge(a, b));
    }

    // Boundary half-edges reversed, so the fill faces agree with the mesh winding.
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    let mut boundary: Vec<(usize, usize)> = directed
        .keys()
        .filter(|&&(a, b)| use_count[&(a.min(b), a.max(b))] == 1)
        .map(|&(a, b)| (b, a))
        .collect();
    boundary.sort_unstable();
    for &(from, to) in &boundary {
        if next.insert(from, to).is_some() {
            return Err(MeshError::NonManifoldEdge(from.min(to), from.max(to)));
        }
    }

    let mut out = mesh.clone();
    while let Some((&start, _)) = next.iter().next() {
        let mut lp = vec![start];
        let mut cur = next.remove(&start).unwrap();
        while cur != start {
            lp.push(cur);
            cur = match next.remove(&cur) {
                Some(n) => n,
                None => {
                    let prev = *lp.last().unwrap();
                    return Err(MeshError::NonManifoldEdge(prev.min(cur), prev.max(cur)));
                }
            };
        }
        match lp.len() {
            0..=2 => {
                return Err(MeshError::NonManifoldEdge(lp[0], *lp.last().unwrap()));
            }
            3 => out.faces.push([lp[0], lp[1], lp[2]]),
            n => {
                let centroid =
                    lp.iter().map(|&v| mesh.vertices[v]).sum::<Vec3>() / n as f64;
                let c = out.vertices.len();
                out.vertices.push(centroid);
                for k in 0..n {
                    out.faces.push([lp[k], lp[(k + 1) % n], c]);
                }
            }
        }
    }
    Ok(out)
}
