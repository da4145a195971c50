//! Bounding volume hierarchy over mesh triangles.
//!
//! Binned-SAH build with at most [`LEAF_SIZE`] triangles per leaf. Supports
//! closest-point queries (ties go to the lowest face index, so results match
//! a brute-force scan exactly) and all-hits ray queries.

use crate::geom::{closest_point_on_triangle, ray_triangle, Aabb, Vec3};
use crate::mesh::TriMesh;

pub const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    /// first triangle for leaves, left child otherwise (right = left + 1)
    start: u32,
    count: u32,
}

/// Result of a closest-triangle query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub face: usize,
    pub point: Vec3,
    /// Barycentric coordinates of `point`, clamped to the triangle.
    pub bary: [f64; 3],
    pub distance_squared: f64,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3; 3]>,
    ids: Vec<usize>,
    depth: usize,
}

impl Bvh {
    /// Builds over every non-degenerate face of `mesh`.
    pub fn build(mesh: &TriMesh) -> Self {
        let mut ids: Vec<usize> = (0..mesh.faces.len())
            .filter(|&f| !mesh.is_degenerate(f))
            .collect();
        let tri_boxes: Vec<Aabb> = (0..mesh.faces.len())
            .map(|f| Aabb::from_points(&mesh.triangle(f)))
            .collect();
        let centroids: Vec<Vec3> = tri_boxes.iter().map(Aabb::center).collect();
        let mut nodes = Vec::with_capacity(2 * ids.len() / LEAF_SIZE + 1);
        let mut depth = 0;
        if !ids.is_empty() {
            nodes.push(Node {
                bbox: Aabb::empty(),
                start: 0,
                count: ids.len() as u32,
            });
            let mut stack = vec![(0usize, 0usize)];
            while let Some((ni, level)) = stack.pop() {
                depth = depth.max(level);
                let (start, count) = (nodes[ni].start as usize, nodes[ni].count as usize);
                let slice = &mut ids[start..start + count];
                let bbox = slice
                    .iter()
                    .fold(Aabb::empty(), |b, &f| b.union(&tri_boxes[f]));
                nodes[ni].bbox = bbox;
                if count <= LEAF_SIZE {
                    continue;
                }
                let mid = split(slice, &centroids, &tri_boxes);
                let left = nodes.len();
                nodes.push(Node {
                    bbox: Aabb::empty(),
                    start: start as u32,
                    count: mid as u32,
                });
                nodes.push(Node {
                    bbox: Aabb::empty(),
                    start: (start + mid) as u32,
                    count: (count - mid) as u32,
                });
                nodes[ni].start = left as u32;
                nodes[ni].count = 0;
                stack.push((left + 1, level + 1));
                stack.push((left, level + 1));
            }
        }
        let tris = ids.iter().map(|&f| mesh.triangle(f)).collect();
        Self { nodes, tris, ids, depth }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Face indices stored in the hierarchy, in leaf order.
    pub fn face_ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::empty(), |n| n.bbox)
    }

    pub fn closest(&self, p: &Vec3) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(usize, Vec3, [f64; 3])> = None;
        // a depth-first walk holds at most depth + 1 pending nodes
        let mut inline = [(0u32, 0.0f64); 128];
        let mut heap;
        let stack: &mut [(u32, f64)] = if self.depth < inline.len() {
            &mut inline
        } else {
            heap = vec![(0u32, 0.0f64); self.depth + 2];
            &mut heap
        };
        let mut top = 1;
        stack[0] = (0, self.nodes[0].bbox.distance_squared(p));
        while top > 0 {
            top -= 1;
            let (ni, nd2) = stack[top];
            if nd2 > best_d2 {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for i in s..s + node.count as usize {
                    let [a, b, c] = &self.tris[i];
                    let (q, bary) = closest_point_on_triangle(p, a, b, c);
                    let d2 = (p - q).norm_squared();
                    let id = self.ids[i];
                    if d2 < best_d2 || (d2 == best_d2 && best.is_some_and(|(bid, _, _)| id < bid)) {
                        best_d2 = d2;
                        best = Some((id, q, bary));
                    }
                }
            } else {
                let l = node.start;
                let dl = self.nodes[l as usize].bbox.distance_squared(p);
                let dr = self.nodes[l as usize + 1].bbox.distance_squared(p);
                // push the farther child first so the nearer one is visited first
                let (first, second) = if dl <= dr {
                    ((l + 1, dr), (l, dl))
                } else {
                    ((l, dl), (l + 1, dr))
                };
                for child in [first, second] {
                    if child.1 <= best_d2 {
                        stack[top] = child;
                        top += 1;
                    }
                }
            }
        }
        best.map(|(face, point, bary)| ClosestHit {
            face,
            point,
            bary,
            distance_squared: best_d2,
        })
    }

    /// Every ray parameter `t > t_min` at which the ray crosses a triangle,
    /// unsorted.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3, t_min: f64, out: &mut Vec<f64>) {
        out.clear();
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            match node.bbox.ray_interval(origin, &inv) {
                Some((_, t1)) if t1 >= t_min => {}
                _ => continue,
            }
            if node.count > 0 {
                let s = node.start as usize;
                for i in s..s + node.count as usize {
                    let [a, b, c] = &self.tris[i];
                    if let Some(t) = ray_triangle(origin, dir, a, b, c) {
                        if t > t_min {
                            out.push(t);
                        }
                    }
                }
            } else {
                stack.push(node.start + 1);
                stack.push(node.start);
            }
        }
    }
}

/// Partitions `ids` in place and returns the split position (0 < mid < len).
fn split(ids: &mut [usize], centroids: &[Vec3], boxes: &[Aabb]) -> usize {
    let cb = Aabb::from_points(ids.iter().map(|&f| &centroids[f]));
    let extent = cb.extent();
    let mut best: Option<(f64, usize, usize)> = None; // cost, axis, bin boundary
    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            continue;
        }
        let bin_of = |f: usize| {
            let t = (centroids[f][axis] - cb.min[axis]) / extent[axis];
            ((t * BINS as f64) as usize).min(BINS - 1)
        };
        let mut counts = [0usize; BINS];
        let mut bins = [Aabb::empty(); BINS];
        for &f in ids.iter() {
            let b = bin_of(f);
            counts[b] += 1;
            bins[b] = bins[b].union(&boxes[f]);
        }
        let mut right_area = [0.0; BINS];
        let mut right_count = [0usize; BINS];
        let mut acc = Aabb::empty();
        let mut n = 0;
        for b in (1..BINS).rev() {
            acc = acc.union(&bins[b]);
            n += counts[b];
            right_area[b] = acc.surface_area();
            right_count[b] = n;
        }
        let mut acc = Aabb::empty();
        let mut n = 0;
        for b in 0..BINS - 1 {
            acc = acc.union(&bins[b]);
            n += counts[b];
            if n == 0 || right_count[b + 1] == 0 {
                continue;
            }
            let cost = acc.surface_area() * n as f64 + right_area[b + 1] * right_count[b + 1] as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, b + 1));
            }
        }
    }
    if let Some((_, axis, boundary)) = best {
        let threshold = |f: usize| {
            let t = (centroids[f][axis] - cb.min[axis]) / extent[axis];
            ((t * BINS as f64) as usize).min(BINS - 1) < boundary
        };
        let mid = partition(ids, threshold);
        if mid > 0 && mid < ids.len() {
            return mid;
        }
    }
    // coincident centroids: fall back to an index split
    let axis = (0..3)
        .max_by(|&a, &b| extent[a].total_cmp(&extent[b]))
        .unwrap();
    ids.sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    ids.len() / 2
}

fn partition(ids: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut i = 0;
    for j in 0..ids.len() {
        if pred(ids[j]) {
            ids.swap(i, j);
            i += 1;
        }
    }
    i
}

/// Brute-force closest triangle over all non-degenerate faces with the same
/// tie rule as [`Bvh::closest`].
pub fn closest_brute_force(mesh: &TriMesh, p: &Vec3) -> Option<ClosestHit> {
    let mut best: Option<ClosestHit> = None;
    for f in 0..mesh.faces.len() {
        if mesh.is_degenerate(f) {
            continue;
        }
        let [a, b, c] = mesh.triangle(f);
        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
        let d2 = (p - q).norm_squared();
        if best.is_none_or(|h| d2 < h.distance_squared) {
            best = Some(ClosestHit {
                face: f,
                point: q,
                bary,
                distance_squared: d2,
            });
        }
    }
    best
}
