//! Quadric error metric decimation of a posed pair.
//!
//! Quadrics and the collapse order come from the canonical mesh only. Every
//! collapse is replayed on the deformed mesh, whose merged vertex goes to the
//! midpoint of its two deformed endpoints, so both outputs keep one face array.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{CorrespondenceMap, MeshError, PosedPair, TriMesh};
use crate::geom::{Mat3, Vec3};

/// Symmetric 4x4 quadric stored as its upper triangle.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn from_plane(n: &Vec3, d: f64, weight: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Self(
            [
                a * a,
                a * b,
                a * c,
                a * d,
                b * b,
                b * c,
                b * d,
                c * c,
                c * d,
                d * d,
            ]
            .map(|v| v * weight),
        )
    }

    fn add(&self, o: &Quadric) -> Quadric {
        let mut q = self.0;
        for (x, y) in q.iter_mut().zip(o.0) {
            *x += y;
        }
        Quadric(q)
    }

    fn eval(&self, p: &Vec3) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9]
    }

    fn minimizer(&self) -> Option<Vec3> {
        let q = &self.0;
        let a = Mat3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        let scale = q[0] + q[4] + q[7];
        if scale <= 0.0 || a.determinant().abs() < 1e-9 * scale * scale * scale {
            return None;
        }
        a.try_inverse().map(|inv| -(inv * Vec3::new(q[3], q[6], q[8])))
    }
}

#[derive(Debug, PartialEq)]
struct Candidate {
    cost: f64,
    a: usize,
    b: usize,
    stamp_a: u32,
    stamp_b: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, ties by vertex indices
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.a.cmp(&self.a))
            .then_with(|| other.b.cmp(&self.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Decimator {
    canon: Vec<Vec3>,
    deformed: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    vert_alive: Vec<bool>,
    stamp: Vec<u32>,
    quadric: Vec<Quadric>,
    members: Vec<Vec<usize>>,
    heap: BinaryHeap<Candidate>,
    live_faces: usize,
}

/// Minimum cosine between a face normal before and after a collapse.
const FLIP_COS: f64 = 0.2;

impl Decimator {
    fn new(pair: &PosedPair) -> Self {
        let canon = pair.canonical.vertices.clone();
        let n = canon.len();
        let faces = pair.canonical.faces.clone();
        let mut vert_faces = vec![Vec::new(); n];
        let mut quadric = vec![Quadric::default(); n];
        for (fi, f) in faces.iter().enumerate() {
            let [a, b, c] = [canon[f[0]], canon[f[1]], canon[f[2]]];
            let cross = (b - a).cross(&(c - a));
            let len = cross.norm();
            if len > 0.0 {
                let nrm = cross / len;
                let q = Quadric::from_plane(&nrm, -nrm.dot(&a), 0.5 * len);
                for &v in f {
                    quadric[v] = quadric[v].add(&q);
                }
            }
            for &v in f {
                vert_faces[v].push(fi);
            }
        }
        Self {
            deformed: pair.deformed.vertices.clone(),
            canon,
            face_alive: vec![true; faces.len()],
            live_faces: faces.len(),
            faces,
            vert_faces,
            vert_alive: vec![true; n],
            stamp: vec![0; n],
            quadric,
            members: (0..n).map(|i| vec![i]).collect(),
            heap: BinaryHeap::new(),
        }
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vert_faces[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn placement(&self, a: usize, b: usize) -> (Vec3, f64) {
        let q = self.quadric[a].add(&self.quadric[b]);
        let (pa, pb) = (self.canon[a], self.canon[b]);
        let mid = (pa + pb) * 0.5;
        let edge = (pa - pb).norm();
        let mut best = (mid, q.eval(&mid));
        for p in [pa, pb] {
            let c = q.eval(&p);
            if c < best.1 {
                best = (p, c);
            }
        }
        if let Some(p) = q.minimizer() {
            if (p - mid).norm() <= 2.0 * edge {
                let c = q.eval(&p);
                if c <= best.1 {
                    best = (p, c);
                }
            }
        }
        (best.0, best.1.max(0.0))
    }

    fn push_edge(&mut self, a: usize, b: usize) {
        let (a, b) = (a.min(b), a.max(b));
        let (_, cost) = self.placement(a, b);
        self.heap.push(Candidate {
            cost,
            a,
            b,
            stamp_a: self.stamp[a],
            stamp_b: self.stamp[b],
        });
    }

    fn shared_faces(&self, a: usize, b: usize) -> Vec<usize> {
        self.vert_faces[a]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&b))
            .collect()
    }

    fn flips(&self, positions: &[Vec3], a: usize, b: usize, new_pos: &Vec3) -> bool {
        for &v in &[a, b] {
            for &f in &self.vert_faces[v] {
                let tri = self.faces[f];
                if tri.contains(&a) && tri.contains(&b) {
                    continue;
                }
                let old = tri.map(|i| positions[i]);
                let new = tri.map(|i| if i == a || i == b { *new_pos } else { positions[i] });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                let (lo, ln) = (n_old.norm(), n_new.norm());
                if ln <= 1e-14 * (1.0 + lo) {
                    return true;
                }
                if lo > 0.0 && n_old.dot(&n_new) < FLIP_COS * lo * ln {
                    return true;
                }
            }
        }
        false
    }

    /// Collapses edge (a, b) into `a` if it keeps the surface manifold and unfolded.
    fn try_collapse(&mut self, a: usize, b: usize) -> bool {
        let shared = self.shared_faces(a, b);
        if shared.len() != 2 {
            return false;
        }
        let opposite: Vec<usize> = shared
            .iter()
            .map(|&f| *self.faces[f].iter().find(|&&v| v != a && v != b).unwrap())
            .collect();
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common: Vec<usize> = na.iter().copied().filter(|v| nb.binary_search(v).is_ok()).collect();
        let mut opp_sorted = opposite.clone();
        opp_sorted.sort_unstable();
        if common != opp_sorted {
            return false;
        }
        if self.live_faces - 2 < 4 {
            return false;
        }
        let (new_c, _) = self.placement(a, b);
        let new_d = (self.deformed[a] + self.deformed[b]) * 0.5;
        if self.flips(&self.canon, a, b, &new_c) || self.flips(&self.deformed, a, b, &new_d) {
            return false;
        }

        for &f in &shared {
            self.face_alive[f] = false;
            for v in self.faces[f] {
                self.vert_faces[v].retain(|&g| g != f);
            }
        }
        self.live_faces -= 2;
        let moved = std::mem::take(&mut self.vert_faces[b]);
        for &f in &moved {
            for v in self.faces[f].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
        }
        self.vert_faces[a].extend(moved);
        self.vert_faces[a].sort_unstable();
        self.canon[a] = new_c;
        self.deformed[a] = new_d;
        self.quadric[a] = self.quadric[a].add(&self.quadric[b]);
        let merged = std::mem::take(&mut self.members[b]);
        self.members[a].extend(merged);
        self.vert_alive[b] = false;
        self.stamp[a] += 1;
        self.stamp[b] += 1;
        for n in self.neighbors(a) {
            self.push_edge(a, n);
        }
        true
    }

    fn run(&mut self, target: usize) -> Result<(), MeshError> {
        for f in 0..self.faces.len() {
            let t = self.faces[f];
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if u < v {
                    self.push_edge(u, v);
                }
            }
        }
        while self.live_faces > target {
            let Some(c) = self.heap.pop() else {
                return Err(MeshError::DecimationStalled {
                    faces: self.live_faces,
                    target,
                });
            };
            if !self.vert_alive[c.a]
                || !self.vert_alive[c.b]
                || self.stamp[c.a] != c.stamp_a
                || self.stamp[c.b] != c.stamp_b
            {
                continue;
            }
            self.try_collapse(c.a, c.b);
        }
        Ok(())
    }

    fn finish(self) -> (PosedPair, CorrespondenceMap) {
        let mut remap = vec![usize::MAX; self.canon.len()];
        let mut canon = Vec::new();
        let mut deformed = Vec::new();
        let mut sets = Vec::new();
        for v in 0..self.canon.len() {
            if self.vert_alive[v] && !self.vert_faces[v].is_empty() {
                remap[v] = canon.len();
                canon.push(self.canon[v]);
                deformed.push(self.deformed[v]);
                let mut m = self.members[v].clone();
                m.sort_unstable();
                sets.push(m);
            }
        }
        // isolated input vertices are carried through unchanged
        for v in 0..self.canon.len() {
            if self.vert_alive[v] && remap[v] == usize::MAX {
                remap[v] = canon.len();
                canon.push(self.canon[v]);
                deformed.push(self.deformed[v]);
                let mut m = self.members[v].clone();
                m.sort_unstable();
                sets.push(m);
            }
        }
        let faces: Vec<[usize; 3]> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| f.map(|v| remap[v]))
            .collect();
        (
            PosedPair {
                canonical: TriMesh {
                    vertices: canon,
                    faces: faces.clone(),
                },
                deformed: TriMesh {
                    vertices: deformed,
                    faces,
                },
            },
            CorrespondenceMap {
                coarse_to_fine: sets,
            },
        )
    }
}

/// Edge-collapse decimation of both meshes of `pair` down to at most
/// `target_faces` faces.
pub fn decimate_pair(
    pair: &PosedPair,
    target_faces: usize,
) -> Result<(PosedPair, CorrespondenceMap), MeshError> {
    if target_faces < 4 {
        return Err(MeshError::TargetTooSmall(target_faces));
    }
    if target_faces >= pair.canonical.faces.len() {
        return Ok((
            pair.clone(),
            CorrespondenceMap::identity(pair.canonical.vertices.len()),
        ));
    }
    let mut d = Decimator::new(pair);
    d.run(target_faces)?;
    Ok(d.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn sphere_pair() -> PosedPair {
        let c = shapes::icosphere(1.0, 3);
        let d = c.transformed(|v| Vec3::new(v.x * 1.5, v.y, v.z + 0.2 * v.x * v.x));
        PosedPair::new(c, d).unwrap()
    }

    #[test]
    fn no_op_when_target_is_large() {
        let p = sphere_pair();
        let (out, map) = decimate_pair(&p, 10_000).unwrap();
        assert_eq!(out, p);
        assert_eq!(map, CorrespondenceMap::identity(p.canonical.vertices.len()));
    }

    #[test]
    fn reduces_and_keeps_pair_consistent() {
        let p = sphere_pair();
        let (out, map) = decimate_pair(&p, 200).unwrap();
        assert!(out.canonical.faces.len() <= 200);
        assert_eq!(out.canonical.faces, out.deformed.faces);
        out.canonical.validate().unwrap();
        assert!(out.canonical.is_closed());
        assert_eq!(out.canonical.euler_characteristic(), 2);
        assert_eq!(map.coarse_to_fine.len(), out.canonical.vertices.len());
        assert!(map.is_partition_of(p.canonical.vertices.len()));
        // canonical stays close to the unit sphere
        for v in &out.canonical.vertices {
            assert!((v.norm() - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn too_small_target_rejected() {
        assert!(matches!(
            decimate_pair(&sphere_pair(), 3),
            Err(MeshError::TargetTooSmall(3))
        ));
    }

    #[test]
    fn tetrahedron_floor() {
        let p = PosedPair::identity(shapes::icosphere(1.0, 0));
        let (out, _) = decimate_pair(&p, 4).unwrap();
        assert_eq!(out.canonical.faces.len(), 4);
    }
}
